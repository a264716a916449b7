#pragma once

#include <string>

#include "njode/observation.hpp"

namespace njode {

// Left-limit conditional-expectation values of one path on an evaluation
// grid: ground truth for the evaluation metric. Jumps only at observation
// times, deterministic flow in between.
struct OraclePath {
    std::vector<double> times;
    std::vector<Vec> left;  // X-hat_{t-} per grid point
};

// E[W_t | O_1..O_k] for a standard Brownian motion observed with i.i.d.
// centered Gaussian noise of std sigma at times 0 < t_1 < ... < t_k <= t.
// The (noiseless) time-0 observation carries no information and must not be
// included. Constant in t after t_k.
double bm_noisy_oracle(const std::vector<double>& obs_times, const Vec& obs_values,
                       double sigma_noise, double t);

// E[X_t | A_t] = x * exp(mu (t - tau)) for geometric Brownian motion, given
// the last observed value x at time tau <= t.
double gbm_oracle(double last_value, double last_time, double mu, double t);

// E[N_t | A_t] = x + lambda (t - tau) for a homogeneous Poisson process.
double poisson_oracle(double last_count, double last_time, double lambda, double t);

// Multivariate generalisation of bm_noisy_oracle for correlated Brownian
// motion with per-coordinate observation noise: conditions on all observed
// (time, coordinate) pairs. obs_* run over observed pairs; corr is the
// common off-diagonal correlation of the driving motion.
Vec corr_bm_noisy_oracle(int d_x, double corr, const std::vector<double>& obs_times,
                         const std::vector<int>& obs_coords, const Vec& obs_values,
                         const Vec& noise_std);

// Left-limit oracle values on the grid for one dataset path; dispatches on
// the dataset's generator name. Each grid point uses only observations
// strictly before it (the time-0 value uses the time-0 observation).
OraclePath oracle_trajectory(const ObservationFramework& fw, const DatasetHeader& header,
                             const std::vector<double>& grid);

// Export in the Trajectory CSV schema (pre rows only, oracle has no jumps
// inside a grid cell).
void append_oracle_csv(std::ostream& out, int path_id, const OraclePath& path);

namespace detail {
// Solves A x = b for symmetric positive definite A (row-major, n x n),
// by Cholesky; adds a 1e-12 jitter once if the factorization fails.
Vec spd_solve(std::vector<double> a, Vec b, int n);
}  // namespace detail

}  // namespace njode
