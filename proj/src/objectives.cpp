#include "njode/objectives.hpp"

#include <cmath>
#include <cstdio>

namespace njode {

LossVariant loss_variant_from_string(const std::string& s) {
    if (s == "standard") return LossVariant::Standard;
    if (s == "noise" || s == "noise_adapted") return LossVariant::NoiseAdapted;
    if (s == "bias" || s == "bias_adjusted") return LossVariant::BiasAdjusted;
    if (s == "dtweighted" || s == "dt_weighted_standard") return LossVariant::DtWeightedStandard;
    throw config_error("unknown loss variant: " + s);
}

std::string to_string(LossVariant v) {
    switch (v) {
        case LossVariant::Standard: return "standard";
        case LossVariant::NoiseAdapted: return "noise_adapted";
        case LossVariant::BiasAdjusted: return "bias_adjusted";
        case LossVariant::DtWeightedStandard: return "dt_weighted_standard";
    }
    return "?";
}

void LossConfig::validate() const {
    if (eps < 0.0) throw config_error("LossConfig: eps must be >= 0");
    const bool sqrt_loss =
        variant == LossVariant::Standard || variant == LossVariant::DtWeightedStandard;
    if (sqrt_loss && eps == 0.0)
        throw config_error("LossConfig: eps > 0 required when the loss differentiates a 2-norm");
    if (variant == LossVariant::BiasAdjusted && !beta)
        throw config_error("LossConfig: bias_adjusted variant needs a bias function");
}

PathPrediction to_prediction(const Trajectory& traj) {
    return PathPrediction{traj.obs_left, traj.obs_post};
}

namespace {

void warn_empty_path() {
    std::fprintf(stderr, "[njode] loss: path with no observations after t=0 contributes 0\n");
}

double norm_eps(const Vec& target, const Vec& y, const Mask& m, double eps) {
    double sq = 0.0;
    for (size_t j = 0; j < target.size(); ++j) {
        const double v = m[j] * (target[j] - y[j]) + eps;
        sq += v * v;
    }
    return std::sqrt(sq);
}

double sq_masked(const Vec& target, const Vec& y, const Mask& m) {
    double sq = 0.0;
    for (size_t j = 0; j < target.size(); ++j) {
        const double v = m[j] * (target[j] - y[j]);
        sq += v * v;
    }
    return sq;
}

void check_alignment(const std::vector<const ObservationFramework*>& fws,
                     const std::vector<PathPrediction>& preds, bool need_post) {
    if (fws.size() != preds.size()) throw usage_error("loss: batch size mismatch");
    for (size_t p = 0; p < fws.size(); ++p) {
        const size_t count = fws[p]->times().size();
        if (preds[p].left.size() != count || (need_post && preds[p].post.size() != count))
            throw usage_error("loss: prediction not aligned with framework observations");
    }
}

}  // namespace

double standard_loss(const std::vector<const ObservationFramework*>& fws,
                     const std::vector<PathPrediction>& preds, double eps) {
    check_alignment(fws, preds, true);
    double total = 0.0;
    for (size_t p = 0; p < fws.size(); ++p) {
        const ObservationFramework& fw = *fws[p];
        if (fw.n() == 0) { warn_empty_path(); continue; }
        double path = 0.0;
        for (int i = 1; i <= fw.n(); ++i) {
            const double a = norm_eps(fw.values()[i], preds[p].post[i], fw.masks()[i], eps);
            const double b = norm_eps(fw.values()[i], preds[p].left[i], fw.masks()[i], eps);
            path += (a + b) * (a + b);
        }
        total += path / fw.n();
    }
    return total / static_cast<double>(fws.size());
}

double noise_adapted_loss(const std::vector<const ObservationFramework*>& fws,
                          const std::vector<PathPrediction>& preds) {
    check_alignment(fws, preds, false);
    double total = 0.0;
    for (size_t p = 0; p < fws.size(); ++p) {
        const ObservationFramework& fw = *fws[p];
        if (fw.n() == 0) { warn_empty_path(); continue; }
        double path = 0.0;
        for (int i = 1; i <= fw.n(); ++i)
            path += sq_masked(fw.values()[i], preds[p].left[i], fw.masks()[i]);
        total += path / fw.n();
    }
    return total / static_cast<double>(fws.size());
}

double bias_adjusted_loss(const std::vector<const ObservationFramework*>& fws,
                          const std::vector<PathPrediction>& preds, const BiasFn& beta) {
    check_alignment(fws, preds, false);
    if (!beta) throw usage_error("bias_adjusted_loss: missing bias function");
    double total = 0.0;
    for (size_t p = 0; p < fws.size(); ++p) {
        const ObservationFramework& fw = *fws[p];
        if (fw.n() == 0) { warn_empty_path(); continue; }
        double path = 0.0;
        for (int i = 1; i <= fw.n(); ++i) {
            Vec target = fw.values()[i];
            const Vec b = beta(fw, i);
            if (b.size() != target.size()) throw usage_error("bias function: wrong dimension");
            for (size_t j = 0; j < target.size(); ++j) target[j] -= b[j];
            path += sq_masked(target, preds[p].left[i], fw.masks()[i]);
        }
        total += path / fw.n();
    }
    return total / static_cast<double>(fws.size());
}

double dt_weighted_standard_loss(const std::vector<const ObservationFramework*>& fws,
                                 const std::vector<PathPrediction>& preds, double eps) {
    check_alignment(fws, preds, true);
    double total = 0.0;
    for (size_t p = 0; p < fws.size(); ++p) {
        const ObservationFramework& fw = *fws[p];
        if (fw.n() == 0) { warn_empty_path(); continue; }
        double path = 0.0;
        for (int i = 1; i <= fw.n(); ++i) {
            const double a = norm_eps(fw.values()[i], preds[p].post[i], fw.masks()[i], eps);
            const double b = norm_eps(fw.values()[i], preds[p].left[i], fw.masks()[i], eps);
            const double dt_i = fw.times()[i] - fw.times()[i - 1];
            path += dt_i * (a + b) * (a + b);
        }
        total += path;
    }
    return total / static_cast<double>(fws.size());
}

double batch_loss(const LossConfig& cfg, const std::vector<const ObservationFramework*>& fws,
                  const std::vector<PathPrediction>& preds) {
    cfg.validate();
    switch (cfg.variant) {
        case LossVariant::Standard: return standard_loss(fws, preds, cfg.eps);
        case LossVariant::NoiseAdapted: return noise_adapted_loss(fws, preds);
        case LossVariant::BiasAdjusted: return bias_adjusted_loss(fws, preds, cfg.beta);
        case LossVariant::DtWeightedStandard: return dt_weighted_standard_loss(fws, preds, cfg.eps);
    }
    throw usage_error("batch_loss: unreachable");
}

ad::NodeRef build_loss_node(ad::Tape& tape, const LossConfig& cfg,
                            const ObservationFramework& fw, const Trajectory& traj) {
    cfg.validate();
    const int n = fw.n();
    if (static_cast<int>(traj.obs_left_node.size()) != n + 1)
        throw usage_error("build_loss_node: trajectory not aligned with framework");
    std::vector<ad::NodeRef> terms;
    std::vector<double> weights;
    if (n == 0) warn_empty_path();
    for (int i = 1; i <= n; ++i) {
        const Mask& m = fw.masks()[i];
        Vec mask_d(m.begin(), m.end());
        Vec target = fw.values()[i];
        if (cfg.variant == LossVariant::BiasAdjusted) {
            const Vec b = cfg.beta(fw, i);
            for (size_t j = 0; j < target.size(); ++j) target[j] -= b[j];
        }
        if (cfg.variant == LossVariant::NoiseAdapted || cfg.variant == LossVariant::BiasAdjusted) {
            ad::NodeRef r = tape.masked_residual(traj.obs_left_node[i], target, mask_d);
            terms.push_back(tape.sqnorm(r));
            weights.push_back(1.0 / n);
        } else {
            ad::NodeRef r_post = tape.masked_residual(traj.obs_post_node[i], target, mask_d);
            ad::NodeRef r_left = tape.masked_residual(traj.obs_left_node[i], target, mask_d);
            ad::NodeRef s =
                tape.add(tape.norm2_eps(r_post, cfg.eps), tape.norm2_eps(r_left, cfg.eps));
            terms.push_back(tape.square(s));
            weights.push_back(cfg.variant == LossVariant::Standard
                                  ? 1.0 / n
                                  : fw.times()[i] - fw.times()[i - 1]);
        }
    }
    return tape.weighted_sum(terms, weights);
}

double moment_bias(int q, const Vec& noise_moments, const Vec& lower_conditional_moments) {
    if (q < 1) throw usage_error("moment_bias: q must be >= 1");
    if (static_cast<int>(noise_moments.size()) < q)
        throw usage_error("moment_bias: missing noise moments up to order q");
    if (static_cast<int>(lower_conditional_moments.size()) < q - 1)
        throw usage_error("moment_bias: missing lower conditional moments");
    double beta = 0.0;
    double binom = 1.0;  // C(q, j), updated multiplicatively
    for (int j = 1; j <= q; ++j) {
        binom = binom * (q - j + 1) / j;
        const int r = q - j;  // order of the conditional moment factor
        const double x_mom = r == 0 ? 1.0 : lower_conditional_moments[r - 1];
        beta += binom * x_mom * noise_moments[j - 1];
    }
    return beta;
}

std::optional<double> empirical_dk(const std::vector<Vec>& a_left_at_k,
                                   const std::vector<Vec>& b_left_at_k,
                                   const std::vector<int>& path_n, int k) {
    if (a_left_at_k.size() != b_left_at_k.size() || a_left_at_k.size() != path_n.size())
        throw usage_error("empirical_dk: input size mismatch");
    if (k < 1) throw usage_error("empirical_dk: k must be >= 1");
    double sum = 0.0;
    int count = 0;
    for (size_t p = 0; p < path_n.size(); ++p) {
        if (path_n[p] < k) continue;
        double sq = 0.0;
        for (size_t j = 0; j < a_left_at_k[p].size(); ++j) {
            const double d = a_left_at_k[p][j] - b_left_at_k[p][j];
            sq += d * d;
        }
        sum += std::sqrt(sq);
        ++count;
    }
    if (count == 0) return std::nullopt;
    // (1/N) sum 1_{n>=k} |.| times c0 = N / count reduces to the mean over
    // qualifying paths
    return sum / count;
}

double eval_metric(const std::vector<OraclePath>& oracle,
                   const std::vector<const Trajectory*>& model) {
    if (oracle.size() != model.size() || oracle.empty())
        throw usage_error("eval_metric: path count mismatch");
    double total = 0.0;
    for (size_t p = 0; p < oracle.size(); ++p) {
        const OraclePath& o = oracle[p];
        const Trajectory& m = *model[p];
        if (o.times.size() != m.grid_times.size())
            throw usage_error("eval_metric: grid size mismatch");
        double path = 0.0;
        for (size_t g = 0; g < o.times.size(); ++g) {
            if (std::abs(o.times[g] - m.grid_times[g]) > 1e-9)
                throw usage_error("eval_metric: grid mismatch");
            double sq = 0.0;
            for (size_t j = 0; j < o.left[g].size(); ++j) {
                const double d = o.left[g][j] - m.grid_left[g][j];
                sq += d * d;
            }
            path += sq;
        }
        total += path / static_cast<double>(o.times.size());
    }
    return total / static_cast<double>(oracle.size());
}

}  // namespace njode
