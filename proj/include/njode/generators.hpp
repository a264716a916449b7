#pragma once

#include "njode/observation.hpp"
#include "njode/rng.hpp"

namespace njode {

// Synthetic dataset settings. One struct covers all generators; each one
// reads the fields it needs.
struct GeneratorConfig {
    std::string name = "bm_noisy";  // bm_noisy | gbm_dependent | poisson_dependent | highdim_noisy
    double T = 1.0;
    int grid_steps = 100;  // grid step = T / grid_steps
    int n_paths = 20000;
    int d_x = 1;
    // process parameters
    double mu = 2.0;             // GBM drift
    double sigma_process = 0.3;  // GBM volatility
    double lambda = 2.0;         // Poisson intensity
    double x0 = 1.0;             // GBM start value
    // observation parameters
    double obs_prob = 0.1;          // p
    double noise_std = 0.5;         // sigma of the Gaussian observation noise (bm_noisy)
    double eta = 3.0;               // std of the GBM mask indicator noise
    double poisson_mask_sigma = 1.0;  // sigma of the Poisson mask rule (paper leaves it open)
    double corr = 0.5;              // cross-coordinate correlation (highdim)
    double zeta = 0.5;              // relative noise factor (highdim)
    uint64_t seed = 0;

    void validate() const;
    std::string to_json() const;
    static GeneratorConfig from_json(const std::string& text);
};

Dataset generate(const GeneratorConfig& cfg);

// Brownian motion observed at Bernoulli(p) grid points with centered Gaussian
// noise; the time-0 observation is noiseless. Stores both X and O.
Dataset gen_bm_noisy(const GeneratorConfig& cfg);

// Geometric Brownian motion where every grid point is a (pseudo) observation
// time and the mask depends on the last actually-observed value.
Dataset gen_gbm_dependent(const GeneratorConfig& cfg);

// Homogeneous Poisson point process with the two-branch dependent mask rule.
Dataset gen_poisson_dependent(const GeneratorConfig& cfg);

// Correlated d_x-dimensional Brownian motion with per-coordinate Bernoulli
// masks and observation noise of std zeta * (per-coordinate data std).
Dataset gen_highdim_noisy(const GeneratorConfig& cfg);

// Mask-rule internals, exposed so the branch logic is unit-testable.
namespace maskrules {
// P(X_tau + V2 >= x0 exp(mu t_i)) for V2 ~ N(0, eta^2)
double gbm_indicator_prob(double x_tau, double t_i, const GeneratorConfig& cfg);
// One GBM mask draw; gap = number of grid steps since the last actual
// observation (V1 ~ Bernoulli(1/gap)). Consumes a fixed number of draws.
bool gbm_mask_draw(CounterRng& rng, double x_tau, int gap, double t_i, const GeneratorConfig& cfg);
// One Poisson mask draw: threshold branch if the previous step was observed
// (non-strict >=), Bernoulli(p) branch otherwise.
bool poisson_mask_draw(CounterRng& rng, bool prev_observed, double n_prev, double t_prev,
                       const GeneratorConfig& cfg);
}  // namespace maskrules

}  // namespace njode
