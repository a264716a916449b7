#include "njode/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>

#include "json.hpp"

namespace njode {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_step(ad::ParamStore& params, const Vec& grad, AdamState& state, const OptimConfig& opt) {
    const size_t n = params.size();
    if (grad.size() != n) throw usage_error("adam_step: gradient size mismatch");
    if (state.m.empty()) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    for (double g : grad)
        if (!std::isfinite(g)) throw numeric_error("adam_step: non-finite gradient");
    ++state.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
    Vec& w = params.values();
    for (int id = 0; id < params.tensor_count(); ++id) {
        const ad::ParamStore::Tensor& t = params.tensor(id);
        const bool decay = t.cols > 0;  // weight matrices only, not biases
        const size_t count = static_cast<size_t>(t.rows) * (t.cols == 0 ? 1 : t.cols);
        for (size_t k = t.offset; k < t.offset + count; ++k) {
            double g = grad[k];
            if (decay) g += opt.weight_decay * w[k];
            state.m[k] = opt.beta1 * state.m[k] + (1.0 - opt.beta1) * g;
            state.v[k] = opt.beta2 * state.v[k] + (1.0 - opt.beta2) * g * g;
            const double mhat = state.m[k] / bc1;
            const double vhat = state.v[k] / bc2;
            w[k] -= opt.lr * mhat / (std::sqrt(vhat) + opt.adam_eps);
        }
    }
}

// ---------------------------------------------------------------------------
// config (de)serialization
// ---------------------------------------------------------------------------

std::string ExperimentConfig::to_json() const {
    json j;
    j["dataset"] = json::parse(dataset.to_json());
    if (!dataset_path.empty()) j["dataset_path"] = dataset_path;
    json m;
    m["d_h"] = model.d_h;
    m["f_hidden"] = model.f_hidden;
    m["rho_hidden"] = model.rho_hidden;
    m["readout_hidden"] = model.readout_hidden;
    m["activation"] = ad::to_string(model.activation);
    m["sig_level"] = model.sig_level;
    m["include_u_coords"] = model.include_u_coords;
    m["recurrent"] = model.recurrent_rho;
    m["residual_readout"] = model.residual_readout;
    m["gamma1"] = model.gamma1;
    m["gamma2"] = model.gamma2;
    j["model"] = m;
    json l;
    l["variant"] = to_string(loss.variant);
    l["eps"] = loss.eps;
    j["loss"] = l;
    json o;
    o["lr"] = optim.lr;
    o["beta1"] = optim.beta1;
    o["beta2"] = optim.beta2;
    o["weight_decay"] = optim.weight_decay;
    o["adam_eps"] = optim.adam_eps;
    o["batch_size"] = optim.batch_size;
    o["epochs"] = optim.epochs;
    o["dropout"] = optim.dropout;
    j["optim"] = o;
    j["eval_kappa"] = eval_kappa;
    j["seed"] = seed;
    j["threads"] = threads;
    j["export_paths"] = export_paths;
    return j.dump();
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    ExperimentConfig c;
    if (j.contains("dataset")) c.dataset = GeneratorConfig::from_json(j["dataset"].dump());
    c.dataset_path = j.value("dataset_path", std::string{});
    if (j.contains("model")) {
        const json& m = j["model"];
        c.model.d_h = m.value("d_h", c.model.d_h);
        c.model.f_hidden = m.value("f_hidden", c.model.f_hidden);
        c.model.rho_hidden = m.value("rho_hidden", c.model.rho_hidden);
        c.model.readout_hidden = m.value("readout_hidden", c.model.readout_hidden);
        c.model.activation = ad::activation_from_string(m.value("activation", std::string("relu")));
        c.model.sig_level = m.value("sig_level", c.model.sig_level);
        c.model.include_u_coords = m.value("include_u_coords", c.model.include_u_coords);
        c.model.recurrent_rho = m.value("recurrent", c.model.recurrent_rho);
        c.model.residual_readout = m.value("residual_readout", c.model.residual_readout);
        c.model.gamma1 = m.value("gamma1", c.model.gamma1);
        c.model.gamma2 = m.value("gamma2", c.model.gamma2);
    }
    if (j.contains("loss")) {
        const json& l = j["loss"];
        c.loss.variant = loss_variant_from_string(l.value("variant", std::string("standard")));
        c.loss.eps = l.value("eps", c.loss.eps);
    }
    if (j.contains("optim")) {
        const json& o = j["optim"];
        c.optim.lr = o.value("lr", c.optim.lr);
        c.optim.beta1 = o.value("beta1", c.optim.beta1);
        c.optim.beta2 = o.value("beta2", c.optim.beta2);
        c.optim.weight_decay = o.value("weight_decay", c.optim.weight_decay);
        c.optim.adam_eps = o.value("adam_eps", c.optim.adam_eps);
        c.optim.batch_size = o.value("batch_size", c.optim.batch_size);
        c.optim.epochs = o.value("epochs", c.optim.epochs);
        c.optim.dropout = o.value("dropout", c.optim.dropout);
    }
    c.eval_kappa = j.value("eval_kappa", c.eval_kappa);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.export_paths = j.value("export_paths", c.export_paths);
    return c;
}

void ExperimentConfig::apply_profile(const std::string& name) {
    if (name == "paper") {
        dataset.n_paths = 20000;
        optim.epochs = 200;
        optim.batch_size = 200;
        optim.dropout = 0.1;
    } else if (name == "desk") {
        dataset.n_paths = 4000;
        optim.epochs = 100;
        optim.batch_size = 50;
        optim.dropout = 0.1;
    } else {
        throw config_error("unknown profile: " + name);
    }
}

std::string RunReport::to_json() const {
    json j;
    j["train_loss"] = train_loss;
    j["test_loss"] = test_loss;
    j["eval_metric"] = eval_metric;
    j["min_eval"] = min_eval;
    j["min_eval_epoch"] = min_eval_epoch;
    j["wall_seconds"] = wall_seconds;
    j["config"] = json::parse(config_json);
    j["config_hash"] = config_hash;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// run pieces
// ---------------------------------------------------------------------------

Dataset prepare_dataset(const ExperimentConfig& cfg) {
    if (!cfg.dataset_path.empty()) return load_dataset(cfg.dataset_path);
    return generate(cfg.dataset);
}

NjodeModel build_model(const ExperimentConfig& cfg, const DatasetHeader& header) {
    ModelConfig mc = cfg.model;
    mc.d_x = header.d_x;
    if (header.n_grid > 0) mc.dt = header.horizon / header.n_grid;
    NjodeModel model(mc);
    model.init_weights(cfg.seed);
    return model;
}

std::vector<int> epoch_shuffle(uint64_t seed, int epoch, int n) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(seed, streams::path_stream(streams::kShuffle, epoch));
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_u64() % (i + 1));
        std::swap(order[i], order[j]);
    }
    return order;
}

std::vector<OraclePath> oracle_paths(const Dataset& ds, int begin, int count, int kappa) {
    std::vector<double> grid(kappa + 1);
    for (int i = 0; i <= kappa; ++i) grid[i] = ds.header.horizon * i / kappa;
    std::vector<OraclePath> out;
    out.reserve(count);
    for (int p = begin; p < begin + count; ++p)
        out.push_back(oracle_trajectory(ds.paths[p], ds.header, grid));
    return out;
}

namespace {

// subsampled view of a dense-grid trajectory on the evaluation grid
double path_eval_metric(const Trajectory& traj, const OraclePath& oracle) {
    const size_t kp1 = oracle.times.size();
    if (traj.grid_times.size() < kp1 || (traj.grid_times.size() - 1) % (kp1 - 1) != 0)
        throw usage_error("eval: trajectory grid incompatible with evaluation grid");
    const size_t stride = (traj.grid_times.size() - 1) / (kp1 - 1);
    double acc = 0.0;
    for (size_t g = 0; g < kp1; ++g) {
        const size_t k = g * stride;
        if (std::abs(traj.grid_times[k] - oracle.times[g]) > 1e-9)
            throw usage_error("eval: grid mismatch");
        double sq = 0.0;
        for (size_t j = 0; j < oracle.left[g].size(); ++j) {
            const double d = oracle.left[g][j] - traj.grid_left[k][j];
            sq += d * d;
        }
        acc += sq;
    }
    return acc / static_cast<double>(kp1);
}

void run_chunked(int count, int threads, const std::function<void(int, int, int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        fn(0, 0, count);
        return;
    }
    std::vector<std::thread> pool;
    for (int c = 0; c < threads; ++c) {
        const int lo = static_cast<int>(static_cast<long>(count) * c / threads);
        const int hi = static_cast<int>(static_cast<long>(count) * (c + 1) / threads);
        pool.emplace_back(fn, c, lo, hi);
    }
    for (auto& t : pool) t.join();
}

}  // namespace

EvalOutputs evaluate_model(const NjodeModel& model, const LossConfig& loss, const Dataset& ds,
                           int begin, int count, const std::vector<OraclePath>& oracles,
                           int kappa, int threads, std::vector<Trajectory>* keep, int keep_count) {
    if (static_cast<int>(oracles.size()) != count)
        throw usage_error("evaluate_model: oracle count mismatch");
    (void)kappa;
    std::vector<double> losses(count), metrics(count);
    if (keep != nullptr) keep->resize(std::min(keep_count, count));
    std::exception_ptr error;
    std::mutex error_mutex;
    run_chunked(count, threads, [&](int, int lo, int hi) {
        try {
            ad::Tape tape(model.params());
            for (int r = lo; r < hi; ++r) {
                tape.reset();
                const ObservationFramework& fw = ds.paths[begin + r];
                Trajectory traj = forward_pass(model, tape, fw, ForwardOptions{true, {}});
                const ObservationFramework* fp = &fw;
                losses[r] = batch_loss(loss, {fp}, {to_prediction(traj)});
                metrics[r] = path_eval_metric(traj, oracles[r]);
                if (keep != nullptr && r < static_cast<int>(keep->size())) (*keep)[r] = std::move(traj);
            }
        } catch (...) {
            std::lock_guard<std::mutex> g(error_mutex);
            if (!error) error = std::current_exception();
        }
    });
    if (error) std::rethrow_exception(error);
    EvalOutputs out;
    for (int r = 0; r < count; ++r) {
        out.loss += losses[r];
        out.eval += metrics[r];
    }
    out.loss /= count;
    out.eval /= count;
    return out;
}

namespace {

void write_metrics_csv(const std::string& file, const RunReport& rep) {
    std::ofstream out(file);
    out << "epoch,train_loss,test_loss,eval_metric\n";
    for (size_t e = 0; e < rep.train_loss.size(); ++e)
        out << (e + 1) << ',' << fmt17(rep.train_loss[e]) << ',' << fmt17(rep.test_loss[e]) << ','
            << fmt17(rep.eval_metric[e]) << '\n';
}

void write_trajectories_csv(const std::string& file, const NjodeModel& model, const Dataset& ds,
                            int begin, int count, const std::vector<OraclePath>& oracles) {
    std::ofstream out(file);
    out << "path_id,t,coord,X,O,oracle,model_left,model_post\n";
    ad::Tape tape(model.params());
    for (int r = 0; r < count; ++r) {
        tape.reset();
        const ObservationFramework& fw = ds.paths[begin + r];
        Trajectory traj = forward_pass(model, tape, fw, ForwardOptions{true, {}});
        const OraclePath& oracle = oracles[r];
        const size_t stride = (traj.grid_times.size() - 1) / (oracle.times.size() - 1);
        for (size_t g = 0; g < oracle.times.size(); ++g) {
            const size_t k = g * stride;
            const double t = traj.grid_times[k];
            // observation at this grid time?
            int obs_i = -1;
            for (size_t i = 0; i < fw.times().size(); ++i)
                if (std::abs(fw.times()[i] - t) <= 1e-9) { obs_i = static_cast<int>(i); break; }
            for (int c = 0; c < fw.d_x(); ++c) {
                out << (begin + r) << ',' << fmt17(t) << ',' << c << ',';
                if (obs_i >= 0) out << fmt17(fw.x_true()[obs_i][c]);
                out << ',';
                if (obs_i >= 0 && fw.masks()[obs_i][c]) out << fmt17(fw.values()[obs_i][c]);
                out << ',' << fmt17(oracle.left[g][c]) << ',' << fmt17(traj.grid_left[k][c]) << ','
                    << fmt17(traj.grid_post[k][c]) << '\n';
            }
        }
    }
}

}  // namespace

RunReport train(const ExperimentConfig& cfg, const std::string& out_dir) {
    const auto t_start = std::chrono::steady_clock::now();
    cfg.loss.validate();
    Dataset ds = prepare_dataset(cfg);
    const int n_paths = static_cast<int>(ds.paths.size());
    const int n_train = std::max(1, static_cast<int>(std::floor(0.8 * n_paths)));
    const int n_test = n_paths - n_train;
    if (n_test < 1) throw config_error("train: dataset too small for an 80/20 split");
    if (ds.header.n_grid <= 0 || cfg.eval_kappa < 1 || ds.header.n_grid % cfg.eval_kappa != 0)
        throw config_error("train: evaluation grid must divide the dataset grid");
    if (cfg.optim.epochs < 1) throw config_error("train: epochs must be >= 1");

    NjodeModel model = build_model(cfg, ds.header);
    const std::vector<OraclePath> oracles = oracle_paths(ds, n_train, n_test, cfg.eval_kappa);

    RunReport rep;
    rep.config_json = cfg.to_json();
    rep.config_hash = sha1_hex(rep.config_json);

    AdamState state;
    Vec grad_total(model.params().size(), 0.0);
    const int threads = std::max(1, cfg.threads);
    for (int epoch = 1; epoch <= cfg.optim.epochs; ++epoch) {
        const std::vector<int> order = epoch_shuffle(cfg.seed, epoch, n_train);
        double epoch_loss = 0.0;
        int batch_index = 0;
        for (int b0 = 0; b0 < n_train; b0 += cfg.optim.batch_size, ++batch_index) {
            const int bsz = std::min(cfg.optim.batch_size, n_train - b0);
            const double inv_b = 1.0 / bsz;
            const int nchunks = std::max(1, std::min(threads, bsz));
            std::vector<Vec> grads(nchunks, Vec(model.params().size(), 0.0));
            std::vector<double> losses(nchunks, 0.0);
            std::exception_ptr error;
            std::mutex error_mutex;
            run_chunked(bsz, nchunks, [&](int c, int lo, int hi) {
                try {
                    ad::Tape tape(model.params());
                    for (int k = lo; k < hi; ++k) {
                        const int path = order[b0 + k];
                        const ObservationFramework& fw = ds.paths[path];
                        tape.reset();
                        CounterRng drop_rng(
                            cfg.seed, streams::path_stream(
                                          streams::kDropout,
                                          static_cast<uint64_t>(epoch) * n_paths + path));
                        ForwardOptions opt;
                        opt.record_grid = false;
                        opt.dropout = ad::DropoutCtx{&drop_rng, cfg.optim.dropout};
                        Trajectory traj = forward_pass(model, tape, fw, opt);
                        ad::NodeRef loss_node = build_loss_node(tape, cfg.loss, fw, traj);
                        losses[c] += tape.scalar_value(loss_node) * inv_b;
                        tape.backward(loss_node, inv_b, grads[c]);
                    }
                } catch (...) {
                    std::lock_guard<std::mutex> g(error_mutex);
                    if (!error) error = std::current_exception();
                }
            });
            if (error) std::rethrow_exception(error);
            double batch_loss_value = 0.0;
            std::fill(grad_total.begin(), grad_total.end(), 0.0);
            for (int c = 0; c < nchunks; ++c) {
                batch_loss_value += losses[c];
                for (size_t k = 0; k < grad_total.size(); ++k) grad_total[k] += grads[c][k];
            }
            if (!std::isfinite(batch_loss_value))
                throw numeric_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index));
            try {
                adam_step(model.params(), grad_total, state, cfg.optim);
            } catch (const numeric_error& e) {
                throw numeric_error(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index) + ")");
            }
            epoch_loss += batch_loss_value * bsz;
        }
        rep.train_loss.push_back(epoch_loss / n_train);
        const EvalOutputs ev =
            evaluate_model(model, cfg.loss, ds, n_train, n_test, oracles, cfg.eval_kappa, threads);
        rep.test_loss.push_back(ev.loss);
        rep.eval_metric.push_back(ev.eval);
        if (rep.min_eval_epoch < 0 || ev.eval < rep.min_eval) {
            rep.min_eval = ev.eval;
            rep.min_eval_epoch = epoch;
        }
    }
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_metrics_csv(out_dir + "/metrics.csv", rep);
        std::ofstream(out_dir + "/report.json") << rep.to_json() << "\n";
        save_weights(model.params(), out_dir + "/weights.json");
        const int n_export = std::min(cfg.export_paths, n_test);
        if (n_export > 0)
            write_trajectories_csv(out_dir + "/trajectories.csv", model, ds, n_train, n_export,
                                   oracles);
    }
    return rep;
}

std::vector<CompareRow> compare_losses(const ExperimentConfig& cfg,
                                       const std::vector<LossVariant>& variants,
                                       const std::string& out_dir) {
    std::vector<CompareRow> rows;
    for (LossVariant v : variants) {
        ExperimentConfig c = cfg;
        c.loss.variant = v;
        const std::string sub = out_dir.empty() ? "" : out_dir + "/" + to_string(v);
        RunReport rep = train(c, sub);
        rows.push_back({to_string(v), rep.min_eval});
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream out(out_dir + "/compare.csv");
        out << "variant,min_eval\n";
        for (const auto& r : rows) out << r.variant << ',' << fmt17(r.min_eval) << '\n';
    }
    return rows;
}

std::vector<SweepRow> noise_sweep(const ExperimentConfig& cfg, const std::vector<double>& zetas,
                                  const std::string& out_dir) {
    if (cfg.dataset.name != "highdim_noisy")
        throw config_error("noise_sweep: requires the highdim_noisy generator");
    std::vector<SweepRow> rows;
    for (double z : zetas) {
        for (LossVariant v : {LossVariant::Standard, LossVariant::NoiseAdapted}) {
            ExperimentConfig c = cfg;
            c.dataset.zeta = z;
            c.loss.variant = v;
            RunReport rep = train(c, "");
            rows.push_back({z, to_string(v), rep.min_eval});
        }
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream out(out_dir + "/sweep.csv");
        out << "zeta,variant,min_eval\n";
        for (const auto& r : rows) out << fmt17(r.zeta) << ',' << r.variant << ',' << fmt17(r.min_eval) << '\n';
    }
    return rows;
}

void save_weights(const ad::ParamStore& params, const std::string& file) {
    json j;
    j["n"] = params.size();
    j["values"] = params.values();
    std::ofstream out(file);
    if (!out) throw config_error("save_weights: cannot open " + file);
    out << j.dump() << "\n";
}

void load_weights(ad::ParamStore& params, const std::string& file) {
    std::ifstream in(file);
    if (!in) throw config_error("load_weights: cannot open " + file);
    json j = json::parse(in);
    Vec v = j.at("values").get<Vec>();
    if (v.size() != params.size()) throw config_error("load_weights: parameter count mismatch");
    params.values() = std::move(v);
}

// ---------------------------------------------------------------------------
// SHA-1 (for the config hash in reports)
// ---------------------------------------------------------------------------

std::string sha1_hex(const std::string& data) {
    uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
    const uint64_t ml = static_cast<uint64_t>(data.size()) * 8;
    std::string msg = data;
    msg.push_back(static_cast<char>(0x80));
    while (msg.size() % 64 != 56) msg.push_back('\0');
    for (int i = 7; i >= 0; --i) msg.push_back(static_cast<char>((ml >> (8 * i)) & 0xFF));
    auto rol = [](uint32_t x, int s) { return (x << s) | (x >> (32 - s)); };
    for (size_t block = 0; block < msg.size(); block += 64) {
        uint32_t w[80];
        for (int i = 0; i < 16; ++i) {
            w[i] = (static_cast<uint8_t>(msg[block + 4 * i]) << 24) |
                   (static_cast<uint8_t>(msg[block + 4 * i + 1]) << 16) |
                   (static_cast<uint8_t>(msg[block + 4 * i + 2]) << 8) |
                   static_cast<uint8_t>(msg[block + 4 * i + 3]);
        }
        for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            uint32_t f, k;
            if (i < 20) { f = (b & c) | (~b & d); k = 0x5A827999u; }
            else if (i < 40) { f = b ^ c ^ d; k = 0x6ED9EBA1u; }
            else if (i < 60) { f = (b & c) | (b & d) | (c & d); k = 0x8F1BBCDCu; }
            else { f = b ^ c ^ d; k = 0xCA62C1D6u; }
            const uint32_t tmp = rol(a, 5) + f + e + k + w[i];
            e = d; d = c; c = rol(b, 30); b = a; a = tmp;
        }
        h[0] += a; h[1] += b; h[2] += c; h[3] += d; h[4] += e;
    }
    char out[41];
    std::snprintf(out, sizeof(out), "%08x%08x%08x%08x%08x", h[0], h[1], h[2], h[3], h[4]);
    return out;
}

}  // namespace njode
