#pragma once

#include <optional>
#include <string>

#include "njode/common.hpp"

namespace njode {

// One sample path's irregular, masked, possibly noisy observations.
// times[0] == 0 and the path is completely observed there. Values hold the
// observation O at each time with unobserved coordinates stored as 0.
// Pseudo observation times (all-zero mask) are allowed for i >= 1.
class ObservationFramework {
public:
    ObservationFramework(int d_x, double horizon, std::vector<double> times,
                         std::vector<Vec> values, std::vector<Mask> masks);

    int d_x() const { return d_x_; }
    double horizon() const { return horizon_; }
    // number of observation events after time 0 (the paper's n)
    int n() const { return static_cast<int>(times_.size()) - 1; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<Vec>& values() const { return values_; }
    const std::vector<Mask>& masks() const { return masks_; }

    // grid alignment: when set, times[i] == time_idx[i] * (horizon / n_grid)
    void set_grid(int n_grid, std::vector<int> time_idx);
    int n_grid() const { return n_grid_; }
    const std::vector<int>& time_idx() const { return time_idx_; }

    // generator-side record of the noiseless process at observation times;
    // never fed to the model (kept for plots and sanity checks)
    void set_x_true(std::vector<Vec> x);
    const std::vector<Vec>& x_true() const { return x_true_.empty() ? values_ : x_true_; }
    bool has_noise_record() const { return !x_true_.empty(); }

private:
    int d_x_;
    double horizon_;
    std::vector<double> times_;
    std::vector<Vec> values_;
    std::vector<Mask> masks_;
    int n_grid_ = 0;
    std::vector<int> time_idx_;
    std::vector<Vec> x_true_;
};

// Last observation time at or before t (t_0 = 0 always qualifies).
double tau(const ObservationFramework& fw, double t);

// Masked variant: last time at or before t at which coordinate j was
// actually observed. Used by the dependent-observation examples.
double tau_masked(const ObservationFramework& fw, double t, int coord);
// Strict version (< t) of the masked variant, for left limits.
double tau_masked_strict(const ObservationFramework& fw, double t, int coord);

// The interpolated observation process X~^{<=t} evaluated at s: a continuous,
// leakage-free, time-consistent rewrite of the observations up to t. Returns
// the (2 d_x + 1)-vector (value coords, count coords, time coord).
Vec interpolate(const ObservationFramework& fw, double t, double s);

// Piecewise-linear vertex list realizing interpolate(fw, t, .) on [0, t].
struct InterpolatedPath {
    std::vector<double> params;  // s-values of the vertices, increasing
    std::vector<Vec> vertices;   // (2 d_x + 1)-vectors
};
InterpolatedPath vertex_list(const ObservationFramework& fw, double t);

// Dataset container plus the JSON-lines serialization (header line followed
// by one record per path). Float64 values round-trip bit-exactly.
struct DatasetHeader {
    int d_x = 1;
    double horizon = 1.0;
    int n_grid = 0;
    std::string generator;
    uint64_t seed = 0;
    int n_paths = 0;
    std::string generator_config;  // JSON echo of the full GeneratorConfig
    Vec noise_std;                 // per-coordinate observation noise std (if noisy)
    double corr = 0.0;             // cross-coordinate correlation (highdim generator)
};

struct Dataset {
    DatasetHeader header;
    std::vector<ObservationFramework> paths;
};

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace njode
