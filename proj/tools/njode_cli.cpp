#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "njode/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw njode::config_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CommonOpts {
    std::string config_file;
    std::string out_dir = "out";
    std::string profile;
    std::string loss;
    uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_file, "experiment config file (JSON)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--profile", opts.profile, "apply a profile: paper or desk")
        ->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--loss", opts.loss, "loss variant: standard, noise, bias, dtweighted")
        ->check(CLI::IsMember({"standard", "noise", "bias", "dtweighted"}));
    auto* s = cmd->add_option("--seed", opts.seed, "run seed");
    cmd->callback([&opts, s]() { opts.seed_set = s->count() > 0; });
    cmd->add_option("--threads", opts.threads, "worker threads");
}

njode::ExperimentConfig make_config(const CommonOpts& opts) {
    njode::ExperimentConfig cfg;
    if (!opts.config_file.empty())
        cfg = njode::ExperimentConfig::from_json(read_file(opts.config_file));
    if (!opts.profile.empty()) cfg.apply_profile(opts.profile);
    if (!opts.loss.empty()) cfg.loss.variant = njode::loss_variant_from_string(opts.loss);
    if (opts.seed_set) {
        cfg.seed = opts.seed;
        cfg.dataset.seed = opts.seed;
    }
    if (opts.threads > 0) cfg.threads = opts.threads;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PD-NJ-ODE experiments: generate data, train, evaluate, compare losses"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto* gen = app.add_subcommand("generate", "generate a synthetic dataset");
    std::string gen_out = "dataset.jsonl";
    add_common(gen, opts);
    gen->add_option("--dataset-out", gen_out, "output dataset file");

    auto* train_cmd = app.add_subcommand("train", "train one model");
    add_common(train_cmd, opts);

    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate saved weights on the test split");
    std::string weights_file, export_traj, export_oracle;
    add_common(eval_cmd, opts);
    eval_cmd->add_option("--weights", weights_file, "weights.json from a training run")->required();
    eval_cmd->add_option("--export-trajectories", export_traj, "write model trajectories (CSV)");
    eval_cmd->add_option("--export-oracle", export_oracle, "write oracle trajectories (CSV)");

    auto* cmp = app.add_subcommand("compare", "train once per loss variant on the same data");
    std::vector<std::string> cmp_variants{"standard", "noise"};
    add_common(cmp, opts);
    cmp->add_option("--variants", cmp_variants, "loss variants to compare");

    auto* sweep = app.add_subcommand("sweep", "noise sweep over zeta on the highdim generator");
    std::vector<double> zetas{0.0, 0.25, 0.5, 0.75, 1.0};
    add_common(sweep, opts);
    sweep->add_option("--zetas", zetas, "zeta values");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            njode::ExperimentConfig cfg = make_config(opts);
            njode::Dataset ds = njode::generate(cfg.dataset);
            njode::save_dataset(ds, gen_out);
            std::cout << "wrote " << ds.paths.size() << " paths to " << gen_out << "\n";
        } else if (train_cmd->parsed()) {
            njode::ExperimentConfig cfg = make_config(opts);
            njode::RunReport rep = njode::train(cfg, opts.out_dir);
            std::cout << "min eval metric " << rep.min_eval << " at epoch " << rep.min_eval_epoch
                      << " (" << rep.wall_seconds << " s)\n"
                      << "outputs in " << opts.out_dir << "\n";
        } else if (eval_cmd->parsed()) {
            njode::ExperimentConfig cfg = make_config(opts);
            njode::Dataset ds = njode::prepare_dataset(cfg);
            njode::NjodeModel model = njode::build_model(cfg, ds.header);
            njode::load_weights(model.params(), weights_file);
            const int n_paths = static_cast<int>(ds.paths.size());
            const int n_train = std::max(1, static_cast<int>(0.8 * n_paths));
            const int n_test = n_paths - n_train;
            auto oracles = njode::oracle_paths(ds, n_train, n_test, cfg.eval_kappa);
            std::vector<njode::Trajectory> kept;
            auto ev = njode::evaluate_model(model, cfg.loss, ds, n_train, n_test, oracles,
                                            cfg.eval_kappa, std::max(1, cfg.threads), &kept,
                                            cfg.export_paths);
            std::cout << "eval_metric " << ev.eval << "  test_loss " << ev.loss << "\n";
            if (!export_traj.empty()) {
                std::ofstream out(export_traj);
                njode::write_trajectory_csv_header(out);
                for (size_t p = 0; p < kept.size(); ++p)
                    njode::append_trajectory_csv(out, n_train + static_cast<int>(p), kept[p]);
            }
            if (!export_oracle.empty()) {
                std::ofstream out(export_oracle);
                njode::write_trajectory_csv_header(out);
                for (size_t p = 0; p < kept.size() && p < oracles.size(); ++p)
                    njode::append_oracle_csv(out, n_train + static_cast<int>(p), oracles[p]);
            }
        } else if (cmp->parsed()) {
            njode::ExperimentConfig cfg = make_config(opts);
            std::vector<njode::LossVariant> variants;
            for (const auto& v : cmp_variants) variants.push_back(njode::loss_variant_from_string(v));
            auto rows = njode::compare_losses(cfg, variants, opts.out_dir);
            std::cout << "variant,min_eval\n";
            for (const auto& r : rows) std::cout << r.variant << ',' << r.min_eval << '\n';
        } else if (sweep->parsed()) {
            njode::ExperimentConfig cfg = make_config(opts);
            auto rows = njode::noise_sweep(cfg, zetas, opts.out_dir);
            std::cout << "zeta,variant,min_eval\n";
            for (const auto& r : rows) std::cout << r.zeta << ',' << r.variant << ',' << r.min_eval << '\n';
        }
    } catch (const njode::numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return 0;
}
