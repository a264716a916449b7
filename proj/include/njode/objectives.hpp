#pragma once

#include <functional>
#include <optional>

#include "njode/model.hpp"
#include "njode/oracles.hpp"

namespace njode {

enum class LossVariant { Standard, NoiseAdapted, BiasAdjusted, DtWeightedStandard };

LossVariant loss_variant_from_string(const std::string& s);
std::string to_string(LossVariant v);

// Known conditional bias of the observation noise at observation i; must only
// look at observations with index < i.
using BiasFn = std::function<Vec(const ObservationFramework&, int i)>;

struct LossConfig {
    LossVariant variant = LossVariant::Standard;
    double eps = 1e-10;  // stability constant inside the norms of the sqrt losses
    BiasFn beta;         // required for BiasAdjusted
    void validate() const;
};

// Model values at the observation times of one path, aligned with the
// framework's observation indices 0..n.
struct PathPrediction {
    std::vector<Vec> left;  // Y_{t_i-}
    std::vector<Vec> post;  // Y_{t_i}
};

PathPrediction to_prediction(const Trajectory& traj);

// Monte Carlo losses over a batch; frameworks and predictions are aligned.
// Each per-path sum runs over observations i = 1..n; a path with n = 0
// contributes 0 (with a warning).
double standard_loss(const std::vector<const ObservationFramework*>& fws,
                     const std::vector<PathPrediction>& preds, double eps);
double noise_adapted_loss(const std::vector<const ObservationFramework*>& fws,
                          const std::vector<PathPrediction>& preds);
double bias_adjusted_loss(const std::vector<const ObservationFramework*>& fws,
                          const std::vector<PathPrediction>& preds, const BiasFn& beta);
double dt_weighted_standard_loss(const std::vector<const ObservationFramework*>& fws,
                                 const std::vector<PathPrediction>& preds, double eps);

double batch_loss(const LossConfig& cfg, const std::vector<const ObservationFramework*>& fws,
                  const std::vector<PathPrediction>& preds);

// Same formulas built on the tape for one path, for training. The batch mean
// is applied by the caller through the backward seed.
ad::NodeRef build_loss_node(ad::Tape& tape, const LossConfig& cfg,
                            const ObservationFramework& fw, const Trajectory& traj);

// Conditional bias of the q-th moment of noisy observations:
//   beta^q = sum_{j=1..q} C(q,j) E[X^{q-j}|A] E[eps^j].
// noise_moments[j-1] = E[eps^j] for j = 1..q (at least q entries);
// lower_conditional_moments[r-1] = E[X^r|A] for r = 1..q-1 (E[X^0] = 1 is
// implicit). Enables learning E[X^q|A] via the bias-adjusted loss on O^q.
double moment_bias(int q, const Vec& noise_moments, const Vec& lower_conditional_moments);

// Empirical pseudo-metric d_k between two processes from their left limits at
// the k-th observation time: mean distance over paths with n >= k (the
// 1/P(n>=k) factor estimated from the same data cancels the thinning).
// Returns nullopt when no path has n >= k.
std::optional<double> empirical_dk(const std::vector<Vec>& a_left_at_k,
                                   const std::vector<Vec>& b_left_at_k,
                                   const std::vector<int>& path_n, int k);

// Evaluation metric: mean over test paths and equidistant grid points of the
// squared 2-norm distance between oracle and model left limits.
double eval_metric(const std::vector<OraclePath>& oracle, const std::vector<const Trajectory*>& model);

}  // namespace njode
