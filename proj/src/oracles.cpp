#include "njode/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "json.hpp"

namespace njode {

namespace detail {

// in-place lower Cholesky; returns false on a non-positive pivot
static bool cholesky(std::vector<double>& a, int n) {
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (s <= 0.0) return false;
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    return true;
}

Vec spd_solve(std::vector<double> a, Vec b, int n) {
    std::vector<double> f = a;
    if (!cholesky(f, n)) {
        std::fprintf(stderr, "[njode] spd_solve: factorization failed, retrying with 1e-12 jitter\n");
        f = a;
        for (int i = 0; i < n; ++i) f[i * n + i] += 1e-12;
        if (!cholesky(f, n)) throw numeric_error("spd_solve: matrix not positive definite");
    }
    // forward then backward substitution with L
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= f[i * n + k] * b[k];
        b[i] = s / f[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) s -= f[k * n + i] * b[k];
        b[i] = s / f[i * n + i];
    }
    return b;
}

}  // namespace detail

double bm_noisy_oracle(const std::vector<double>& obs_times, const Vec& obs_values,
                       double sigma_noise, double t) {
    const int k = static_cast<int>(obs_times.size());
    if (k < 1) throw usage_error("bm_noisy_oracle: needs at least one observation");
    if (static_cast<int>(obs_values.size()) != k)
        throw usage_error("bm_noisy_oracle: times/values size mismatch");
    if (t < obs_times.back() - 1e-12)
        throw usage_error("bm_noisy_oracle: t must not precede the last observation");
    std::vector<double> cov(static_cast<size_t>(k) * k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            cov[i * k + j] = std::min(obs_times[i], obs_times[j]) +
                             (i == j ? sigma_noise * sigma_noise : 0.0);
    Vec w = detail::spd_solve(std::move(cov), obs_values, k);
    double mu_hat = 0.0;
    for (int i = 0; i < k; ++i) mu_hat += obs_times[i] * w[i];
    return mu_hat;
}

double gbm_oracle(double last_value, double last_time, double mu, double t) {
    if (t < last_time - 1e-12) throw usage_error("gbm_oracle: t must not precede tau");
    return last_value * std::exp(mu * (t - last_time));
}

double poisson_oracle(double last_count, double last_time, double lambda, double t) {
    if (t < last_time - 1e-12) throw usage_error("poisson_oracle: t must not precede tau");
    return last_count + lambda * (t - last_time);
}

Vec corr_bm_noisy_oracle(int d_x, double corr, const std::vector<double>& obs_times,
                         const std::vector<int>& obs_coords, const Vec& obs_values,
                         const Vec& noise_std) {
    const int k = static_cast<int>(obs_times.size());
    if (static_cast<int>(obs_coords.size()) != k || static_cast<int>(obs_values.size()) != k)
        throw usage_error("corr_bm_noisy_oracle: input size mismatch");
    Vec mu_hat(d_x, 0.0);
    if (k == 0) return mu_hat;
    auto c = [&](int a, int b) { return a == b ? 1.0 : corr; };
    std::vector<double> cov(static_cast<size_t>(k) * k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            double v = c(obs_coords[i], obs_coords[j]) * std::min(obs_times[i], obs_times[j]);
            if (i == j) v += noise_std[obs_coords[i]] * noise_std[obs_coords[i]];
            cov[i * k + j] = v;
        }
    Vec w = detail::spd_solve(std::move(cov), obs_values, k);
    for (int coord = 0; coord < d_x; ++coord) {
        double s = 0.0;
        for (int i = 0; i < k; ++i) s += c(coord, obs_coords[i]) * obs_times[i] * w[i];
        mu_hat[coord] = s;
    }
    return mu_hat;
}

namespace {

using nlohmann::json;

double config_field(const DatasetHeader& header, const std::string& key, double fallback) {
    if (header.generator_config.empty()) return fallback;
    json j = json::parse(header.generator_config, nullptr, false);
    if (j.is_discarded()) return fallback;
    return j.value(key, fallback);
}

OraclePath bm_noisy_trajectory(const ObservationFramework& fw, double sigma,
                               const std::vector<double>& grid) {
    OraclePath out;
    out.times = grid;
    std::vector<double> ts;
    Vec vs;
    size_t next = 1;  // skip the (noiseless, uninformative) time-0 observation
    double current = 0.0;
    for (double g : grid) {
        bool changed = false;
        while (next < fw.times().size() && fw.times()[next] < g) {
            if (fw.masks()[next][0]) {
                ts.push_back(fw.times()[next]);
                vs.push_back(fw.values()[next][0]);
                changed = true;
            }
            ++next;
        }
        if (changed) current = bm_noisy_oracle(ts, vs, sigma, ts.back());
        out.left.push_back(Vec{current});
    }
    return out;
}

OraclePath flow_trajectory(const ObservationFramework& fw, const std::vector<double>& grid,
                           bool gbm, double rate) {
    OraclePath out;
    out.times = grid;
    double x_last = fw.values()[0][0];
    double t_last = 0.0;
    size_t next = 1;
    for (size_t gi = 0; gi < grid.size(); ++gi) {
        const double g = grid[gi];
        while (next < fw.times().size() && fw.times()[next] < g) {
            if (fw.masks()[next][0]) {
                x_last = fw.values()[next][0];
                t_last = fw.times()[next];
            }
            ++next;
        }
        const double v = gbm ? gbm_oracle(x_last, t_last, rate, g)
                             : poisson_oracle(x_last, t_last, rate, g);
        out.left.push_back(Vec{v});
    }
    return out;
}

OraclePath highdim_trajectory(const ObservationFramework& fw, const DatasetHeader& header,
                              const std::vector<double>& grid) {
    OraclePath out;
    out.times = grid;
    const int d = fw.d_x();
    if (static_cast<int>(header.noise_std.size()) != d)
        throw config_error("oracle_trajectory: highdim dataset lacks per-coordinate noise stds");
    std::vector<double> ts;
    std::vector<int> cs;
    Vec vs;
    size_t next = 1;
    Vec current(d, 0.0);
    for (double g : grid) {
        bool changed = false;
        while (next < fw.times().size() && fw.times()[next] < g) {
            for (int j = 0; j < d; ++j)
                if (fw.masks()[next][j]) {
                    ts.push_back(fw.times()[next]);
                    cs.push_back(j);
                    vs.push_back(fw.values()[next][j]);
                    changed = true;
                }
            ++next;
        }
        if (changed)
            current = corr_bm_noisy_oracle(d, header.corr, ts, cs, vs, header.noise_std);
        out.left.push_back(current);
    }
    return out;
}

}  // namespace

OraclePath oracle_trajectory(const ObservationFramework& fw, const DatasetHeader& header,
                             const std::vector<double>& grid) {
    if (grid.empty()) throw usage_error("oracle_trajectory: empty grid");
    if (header.generator == "bm_noisy") {
        const double sigma = header.noise_std.empty() ? config_field(header, "noise_std", 0.0)
                                                      : header.noise_std[0];
        return bm_noisy_trajectory(fw, sigma, grid);
    }
    if (header.generator == "gbm_dependent")
        return flow_trajectory(fw, grid, true, config_field(header, "mu", 2.0));
    if (header.generator == "poisson_dependent")
        return flow_trajectory(fw, grid, false, config_field(header, "lambda", 2.0));
    if (header.generator == "highdim_noisy") return highdim_trajectory(fw, header, grid);
    throw config_error("oracle_trajectory: no oracle for generator '" + header.generator + "'");
}

void append_oracle_csv(std::ostream& out, int path_id, const OraclePath& path) {
    for (size_t k = 0; k < path.times.size(); ++k)
        for (size_t c = 0; c < path.left[k].size(); ++c)
            out << path_id << ',' << fmt17(path.times[k]) << ',' << c << ','
                << fmt17(path.left[k][c]) << ",0,pre\n";
}

}  // namespace njode
