#pragma once

#include "njode/generators.hpp"
#include "njode/objectives.hpp"

namespace njode {

struct OptimConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 5e-4;  // coupled (L2-in-gradient), weights only
    double adam_eps = 1e-8;
    int batch_size = 200;
    int epochs = 200;
    double dropout = 0.0;
};

struct AdamState {
    Vec m, v;
    long step = 0;
};

// Standard Adam with bias correction; throws numeric_error on non-finite
// gradients. Weight decay is added to the gradient of weight matrices only.
void adam_step(ad::ParamStore& params, const Vec& grad, AdamState& state, const OptimConfig& opt);

struct ExperimentConfig {
    GeneratorConfig dataset;
    std::string dataset_path;  // when set, load this file instead of generating
    ModelConfig model;         // d_x / dt are overwritten from the dataset
    LossConfig loss;
    OptimConfig optim;
    int eval_kappa = 100;  // evaluation grid has kappa + 1 points
    uint64_t seed = 42;
    int threads = 1;
    int export_paths = 5;  // test paths written to trajectories.csv

    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    void apply_profile(const std::string& name);  // "paper" or "desk"
};

struct RunReport {
    std::vector<double> train_loss, test_loss, eval_metric;  // one entry per epoch
    double min_eval = 0.0;
    int min_eval_epoch = -1;  // 1-based
    double wall_seconds = 0.0;
    std::string config_json;
    std::string config_hash;
    std::string to_json() const;
};

Dataset prepare_dataset(const ExperimentConfig& cfg);
NjodeModel build_model(const ExperimentConfig& cfg, const DatasetHeader& header);

// Seeded permutation of 0..n-1 used to form the epoch's mini-batches; every
// training sample appears exactly once per epoch.
std::vector<int> epoch_shuffle(uint64_t seed, int epoch, int n);

// Oracle left limits on the kappa+1-point evaluation grid for paths
// [begin, begin+count) of the dataset.
std::vector<OraclePath> oracle_paths(const Dataset& ds, int begin, int count, int kappa);

struct EvalOutputs {
    double eval = 0.0;
    double loss = 0.0;
};

// Loss and evaluation metric of the model over paths [begin, begin+count),
// with oracle paths aligned to that range. Optionally keeps the first
// keep_count trajectories for export.
EvalOutputs evaluate_model(const NjodeModel& model, const LossConfig& loss, const Dataset& ds,
                           int begin, int count, const std::vector<OraclePath>& oracles,
                           int kappa, int threads, std::vector<Trajectory>* keep = nullptr,
                           int keep_count = 0);

// Full training run (generate/load, 80/20 split, epochs of shuffled
// mini-batches, per-epoch evaluation). When out_dir is non-empty, writes
// report.json, metrics.csv, trajectories.csv and weights.json there.
RunReport train(const ExperimentConfig& cfg, const std::string& out_dir = "");

struct CompareRow {
    std::string variant;
    double min_eval = 0.0;
};
// Trains one model per variant on the identical dataset and seed.
std::vector<CompareRow> compare_losses(const ExperimentConfig& cfg,
                                       const std::vector<LossVariant>& variants,
                                       const std::string& out_dir = "");

struct SweepRow {
    double zeta = 0.0;
    std::string variant;
    double min_eval = 0.0;
};
// Noise sweep on the highdim generator: trains standard and noise-adapted
// models per zeta; writes sweep.csv when out_dir is non-empty.
std::vector<SweepRow> noise_sweep(const ExperimentConfig& cfg, const std::vector<double>& zetas,
                                  const std::string& out_dir = "");

void save_weights(const ad::ParamStore& params, const std::string& file);
void load_weights(ad::ParamStore& params, const std::string& file);

std::string sha1_hex(const std::string& data);

}  // namespace njode
