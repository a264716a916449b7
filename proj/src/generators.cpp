#include "njode/generators.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace njode {

using nlohmann::json;

void GeneratorConfig::validate() const {
    if (T <= 0.0) throw config_error("GeneratorConfig: T must be > 0");
    if (grid_steps < 1) throw config_error("GeneratorConfig: grid_steps must be >= 1");
    if (n_paths < 1) throw config_error("GeneratorConfig: n_paths must be >= 1");
    if (obs_prob <= 0.0 || obs_prob > 1.0) throw config_error("GeneratorConfig: need 0 < p <= 1");
    if (noise_std < 0.0) throw config_error("GeneratorConfig: noise_std must be >= 0");
    if (zeta < 0.0) throw config_error("GeneratorConfig: zeta must be >= 0");
    if (name == "bm_noisy" || name == "gbm_dependent" || name == "poisson_dependent") {
        if (d_x != 1) throw config_error("GeneratorConfig: " + name + " is 1-dimensional");
    } else if (name == "highdim_noisy") {
        if (d_x < 2) throw config_error("GeneratorConfig: highdim_noisy needs d_x >= 2");
        if (std::abs(corr) >= 1.0) throw config_error("GeneratorConfig: need |corr| < 1");
    } else {
        throw config_error("GeneratorConfig: unknown generator '" + name + "'");
    }
    if (name == "poisson_dependent" && lambda <= 0.0)
        throw config_error("GeneratorConfig: lambda must be > 0");
}

std::string GeneratorConfig::to_json() const {
    json j;
    j["name"] = name;
    j["T"] = T;
    j["grid_steps"] = grid_steps;
    j["n_paths"] = n_paths;
    j["d_x"] = d_x;
    j["mu"] = mu;
    j["sigma_process"] = sigma_process;
    j["lambda"] = lambda;
    j["x0"] = x0;
    j["obs_prob"] = obs_prob;
    j["noise_std"] = noise_std;
    j["eta"] = eta;
    j["poisson_mask_sigma"] = poisson_mask_sigma;
    j["corr"] = corr;
    j["zeta"] = zeta;
    j["seed"] = seed;
    return j.dump();
}

GeneratorConfig GeneratorConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    GeneratorConfig c;
    c.name = j.value("name", c.name);
    c.T = j.value("T", c.T);
    c.grid_steps = j.value("grid_steps", c.grid_steps);
    c.n_paths = j.value("n_paths", c.n_paths);
    c.d_x = j.value("d_x", c.d_x);
    c.mu = j.value("mu", c.mu);
    c.sigma_process = j.value("sigma_process", c.sigma_process);
    c.lambda = j.value("lambda", c.lambda);
    c.x0 = j.value("x0", c.x0);
    c.obs_prob = j.value("obs_prob", c.obs_prob);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.eta = j.value("eta", c.eta);
    c.poisson_mask_sigma = j.value("poisson_mask_sigma", c.poisson_mask_sigma);
    c.corr = j.value("corr", c.corr);
    c.zeta = j.value("zeta", c.zeta);
    c.seed = j.value("seed", c.seed);
    return c;
}

namespace maskrules {

static double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double gbm_indicator_prob(double x_tau, double t_i, const GeneratorConfig& cfg) {
    const double threshold = cfg.x0 * std::exp(cfg.mu * t_i);
    if (cfg.eta == 0.0) return x_tau >= threshold ? 1.0 : 0.0;
    return normal_cdf((x_tau - threshold) / cfg.eta);
}

bool gbm_mask_draw(CounterRng& rng, double x_tau, int gap, double t_i,
                   const GeneratorConfig& cfg) {
    // fixed draw count per call so the mask stream stays aligned
    const double u1 = rng.next_uniform();
    const double g2 = rng.next_gaussian();
    const double u3 = rng.next_uniform();
    const bool v1 = u1 < 1.0 / gap;
    if (v1) return x_tau + cfg.eta * g2 >= cfg.x0 * std::exp(cfg.mu * t_i);
    return u3 < cfg.obs_prob;
}

bool poisson_mask_draw(CounterRng& rng, bool prev_observed, double n_prev, double t_prev,
                       const GeneratorConfig& cfg) {
    const double g = rng.next_gaussian();
    const double u = rng.next_uniform();
    if (prev_observed) return n_prev + cfg.poisson_mask_sigma * g >= cfg.lambda * t_prev;
    return u < cfg.obs_prob;
}

}  // namespace maskrules

namespace {

DatasetHeader make_header(const GeneratorConfig& cfg) {
    DatasetHeader h;
    h.d_x = cfg.d_x;
    h.horizon = cfg.T;
    h.n_grid = cfg.grid_steps;
    h.generator = cfg.name;
    h.seed = cfg.seed;
    h.n_paths = cfg.n_paths;
    h.generator_config = cfg.to_json();
    return h;
}

}  // namespace

Dataset gen_bm_noisy(const GeneratorConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.header = make_header(cfg);
    ds.header.noise_std = Vec{cfg.noise_std};
    const double h = cfg.T / cfg.grid_steps;
    const double sqrt_h = std::sqrt(h);
    for (int p = 0; p < cfg.n_paths; ++p) {
        CounterRng proc(cfg.seed, streams::path_stream(streams::kProcess, p));
        CounterRng noise(cfg.seed, streams::path_stream(streams::kNoise, p));
        CounterRng mask(cfg.seed, streams::path_stream(streams::kMask, p));
        std::vector<double> times{0.0};
        std::vector<int> idx{0};
        std::vector<Vec> values{Vec{0.0}};
        std::vector<Vec> xtrue{Vec{0.0}};
        std::vector<Mask> masks{Mask{1}};
        double w = 0.0;
        for (int k = 1; k <= cfg.grid_steps; ++k) {
            w += sqrt_h * proc.next_gaussian();
            if (mask.next_bernoulli(cfg.obs_prob)) {
                times.push_back(k * h);
                idx.push_back(k);
                xtrue.push_back(Vec{w});
                values.push_back(Vec{w + cfg.noise_std * noise.next_gaussian()});
                masks.push_back(Mask{1});
            }
        }
        ObservationFramework fw(1, cfg.T, std::move(times), std::move(values), std::move(masks));
        fw.set_grid(cfg.grid_steps, std::move(idx));
        fw.set_x_true(std::move(xtrue));
        ds.paths.push_back(std::move(fw));
    }
    return ds;
}

Dataset gen_gbm_dependent(const GeneratorConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.header = make_header(cfg);
    const double h = cfg.T / cfg.grid_steps;
    const double sqrt_h = std::sqrt(h);
    for (int p = 0; p < cfg.n_paths; ++p) {
        CounterRng proc(cfg.seed, streams::path_stream(streams::kProcess, p));
        CounterRng mask(cfg.seed, streams::path_stream(streams::kMask, p));
        // every grid point is a (pseudo) observation time
        std::vector<double> times{0.0};
        std::vector<int> idx{0};
        std::vector<Vec> values{Vec{cfg.x0}};
        std::vector<Vec> xtrue{Vec{cfg.x0}};
        std::vector<Mask> masks{Mask{1}};
        double x = cfg.x0;
        int last_obs_idx = 0;
        double x_tau = cfg.x0;
        // exact log-normal stepping (Euler on the log-dynamics): keeps
        // E[X_t] = x0 exp(mu t) exactly, so the closed-form conditional
        // expectation is consistent with the sampled data
        const double log_drift = (cfg.mu - 0.5 * cfg.sigma_process * cfg.sigma_process) * h;
        for (int k = 1; k <= cfg.grid_steps; ++k) {
            x *= std::exp(log_drift + cfg.sigma_process * sqrt_h * proc.next_gaussian());
            const bool observed = maskrules::gbm_mask_draw(mask, x_tau, k - last_obs_idx, k * h, cfg);
            times.push_back(k * h);
            idx.push_back(k);
            xtrue.push_back(Vec{x});
            values.push_back(Vec{observed ? x : 0.0});
            masks.push_back(Mask{static_cast<uint8_t>(observed ? 1 : 0)});
            if (observed) {
                last_obs_idx = k;
                x_tau = x;
            }
        }
        ObservationFramework fw(1, cfg.T, std::move(times), std::move(values), std::move(masks));
        fw.set_grid(cfg.grid_steps, std::move(idx));
        fw.set_x_true(std::move(xtrue));
        ds.paths.push_back(std::move(fw));
    }
    return ds;
}

Dataset gen_poisson_dependent(const GeneratorConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.header = make_header(cfg);
    const double h = cfg.T / cfg.grid_steps;
    for (int p = 0; p < cfg.n_paths; ++p) {
        CounterRng proc(cfg.seed, streams::path_stream(streams::kProcess, p));
        CounterRng mask(cfg.seed, streams::path_stream(streams::kMask, p));
        std::vector<double> times{0.0};
        std::vector<int> idx{0};
        std::vector<Vec> values{Vec{0.0}};
        std::vector<Vec> xtrue{Vec{0.0}};
        std::vector<Mask> masks{Mask{1}};
        double count = 0.0;
        double n_prev = 0.0;
        bool prev_observed = true;  // M_0 = 1
        for (int k = 1; k <= cfg.grid_steps; ++k) {
            const double t_prev = (k - 1) * h;
            const bool observed =
                maskrules::poisson_mask_draw(mask, prev_observed, n_prev, t_prev, cfg);
            count += proc.next_poisson(cfg.lambda * h);
            times.push_back(k * h);
            idx.push_back(k);
            xtrue.push_back(Vec{count});
            values.push_back(Vec{observed ? count : 0.0});
            masks.push_back(Mask{static_cast<uint8_t>(observed ? 1 : 0)});
            prev_observed = observed;
            n_prev = count;
        }
        ObservationFramework fw(1, cfg.T, std::move(times), std::move(values), std::move(masks));
        fw.set_grid(cfg.grid_steps, std::move(idx));
        fw.set_x_true(std::move(xtrue));
        ds.paths.push_back(std::move(fw));
    }
    return ds;
}

Dataset gen_highdim_noisy(const GeneratorConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.header = make_header(cfg);
    ds.header.corr = cfg.corr;
    const int d = cfg.d_x;
    const double h = cfg.T / cfg.grid_steps;
    const double sqrt_h = std::sqrt(h);
    // W = L B for C = L L^T with unit diagonal and constant off-diagonal corr
    std::vector<double> chol(static_cast<size_t>(d) * d, 0.0);
    {
        std::vector<double> c(static_cast<size_t>(d) * d, cfg.corr);
        for (int i = 0; i < d; ++i) c[i * d + i] = 1.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j <= i; ++j) {
                double s = c[i * d + j];
                for (int k = 0; k < j; ++k) s -= chol[i * d + k] * chol[j * d + k];
                chol[i * d + j] = (i == j) ? std::sqrt(s) : s / chol[j * d + j];
            }
    }

    // pass 1: noiseless paths and masks
    struct RawPath {
        std::vector<double> times;
        std::vector<int> idx;
        std::vector<Vec> x;
        std::vector<Mask> masks;
    };
    std::vector<RawPath> raw(cfg.n_paths);
    for (int p = 0; p < cfg.n_paths; ++p) {
        CounterRng proc(cfg.seed, streams::path_stream(streams::kProcess, p));
        CounterRng mask(cfg.seed, streams::path_stream(streams::kMask, p));
        RawPath& rp = raw[p];
        rp.times.push_back(0.0);
        rp.idx.push_back(0);
        rp.x.push_back(Vec(d, 0.0));
        rp.masks.push_back(Mask(d, 1));
        Vec w(d, 0.0);
        Vec z(d);
        for (int k = 1; k <= cfg.grid_steps; ++k) {
            for (int j = 0; j < d; ++j) z[j] = proc.next_gaussian();
            for (int i = 0; i < d; ++i) {
                double dw = 0.0;
                for (int j = 0; j <= i; ++j) dw += chol[i * d + j] * z[j];
                w[i] += sqrt_h * dw;
            }
            Mask m(d, 0);
            bool any = false;
            for (int j = 0; j < d; ++j) {
                m[j] = mask.next_bernoulli(cfg.obs_prob) ? 1 : 0;
                any = any || m[j];
            }
            if (!any) continue;  // only actual observation events are stored
            rp.times.push_back(k * h);
            rp.idx.push_back(k);
            rp.x.push_back(w);
            rp.masks.push_back(std::move(m));
        }
    }

    // per-coordinate std over observed values of the training split
    const int n_train = std::max(1, static_cast<int>(0.8 * cfg.n_paths));
    Vec mean(d, 0.0), sq(d, 0.0);
    std::vector<long> cnt(d, 0);
    for (int p = 0; p < n_train; ++p)
        for (size_t i = 1; i < raw[p].times.size(); ++i)
            for (int j = 0; j < d; ++j)
                if (raw[p].masks[i][j]) {
                    mean[j] += raw[p].x[i][j];
                    sq[j] += raw[p].x[i][j] * raw[p].x[i][j];
                    ++cnt[j];
                }
    Vec sigma_data(d, 0.0);
    for (int j = 0; j < d; ++j) {
        if (cnt[j] < 2) throw numeric_error("gen_highdim_noisy: too few observations per coordinate");
        const double m1 = mean[j] / cnt[j];
        sigma_data[j] = std::sqrt(std::max(0.0, sq[j] / cnt[j] - m1 * m1));
    }
    ds.header.noise_std.resize(d);
    for (int j = 0; j < d; ++j) ds.header.noise_std[j] = cfg.zeta * sigma_data[j];

    // pass 2: add observation noise (time-0 stays noiseless)
    for (int p = 0; p < cfg.n_paths; ++p) {
        CounterRng noise(cfg.seed, streams::path_stream(streams::kNoise, p));
        RawPath& rp = raw[p];
        std::vector<Vec> values = rp.x;
        for (size_t i = 1; i < rp.times.size(); ++i)
            for (int j = 0; j < d; ++j) {
                if (!rp.masks[i][j]) { values[i][j] = 0.0; continue; }
                values[i][j] += ds.header.noise_std[j] * noise.next_gaussian();
            }
        ObservationFramework fw(d, cfg.T, rp.times, std::move(values), rp.masks);
        fw.set_grid(cfg.grid_steps, rp.idx);
        fw.set_x_true(rp.x);
        ds.paths.push_back(std::move(fw));
    }
    return ds;
}

Dataset generate(const GeneratorConfig& cfg) {
    if (cfg.name == "bm_noisy") return gen_bm_noisy(cfg);
    if (cfg.name == "gbm_dependent") return gen_gbm_dependent(cfg);
    if (cfg.name == "poisson_dependent") return gen_poisson_dependent(cfg);
    if (cfg.name == "highdim_noisy") return gen_highdim_noisy(cfg);
    throw config_error("generate: unknown generator '" + cfg.name + "'");
}

}  // namespace njode
