#pragma once

#include <iosfwd>

#include "njode/autodiff.hpp"
#include "njode/observation.hpp"
#include "njode/signature.hpp"

namespace njode {

// Architecture and integration settings of the PD-NJ-ODE.
struct ModelConfig {
    int d_x = 1;
    int d_h = 100;                      // latent dimension
    std::vector<int> f_hidden{100};     // ODE vector-field network
    std::vector<int> rho_hidden{100};   // jump (encoder) network
    std::vector<int> readout_hidden{};  // empty = linear readout
    ad::Activation activation = ad::Activation::Relu;
    int sig_level = 3;
    bool include_u_coords = false;  // feed observation-count coordinates to the signature
    bool recurrent_rho = true;      // feed the pre-jump latent state into rho
    bool residual_readout = true;   // Y = readout(H) + H[0:d_x]
    double gamma1 = 1e3;            // output bound of the vector-field network
    double gamma2 = 1e3;            // output bound of the jump network
    double dt = 0.01;               // Euler step

    int sig_path_dim() const { return include_u_coords ? 2 * d_x + 1 : d_x + 1; }
    int sig_len() const { return TruncatedSignature::sig_length(sig_path_dim(), sig_level); }
    // (H, t, tau, signature, X0)
    int f_input_dim() const { return d_h + 2 + sig_len() + d_x; }
    // (H, t, signature, X0, current values, mask)
    int rho_input_dim() const { return d_h + 1 + sig_len() + 3 * d_x; }

    void validate() const;
};

class NjodeModel {
public:
    explicit NjodeModel(ModelConfig cfg);

    void init_weights(uint64_t seed) { params_.init_uniform(seed); }

    const ModelConfig& config() const { return cfg_; }
    ad::ParamStore& params() { return params_; }
    const ad::ParamStore& params() const { return params_; }
    const ad::DenseNetwork& f_net() const { return f_net_; }
    const ad::DenseNetwork& rho_net() const { return rho_net_; }
    const ad::DenseNetwork& readout_net() const { return readout_net_; }

private:
    ModelConfig cfg_;
    ad::ParamStore params_;
    ad::DenseNetwork f_net_, rho_net_, readout_net_;
};

// Model output along one path: dense grid values plus the pre-/post-jump
// values at the observation times. Node references stay valid as long as the
// tape that produced them is neither reset nor destroyed.
struct Trajectory {
    std::vector<double> grid_times;
    std::vector<Vec> grid_left;  // left limits Y_{t-}
    std::vector<Vec> grid_post;  // == grid_left except at observation times
    std::vector<uint8_t> grid_is_obs;

    std::vector<double> obs_times;
    std::vector<Vec> obs_left;   // Y_{t_i-}
    std::vector<Vec> obs_post;   // Y_{t_i}
    std::vector<ad::NodeRef> obs_left_node, obs_post_node;
};

struct ForwardOptions {
    bool record_grid = true;
    ad::DropoutCtx dropout{};
};

// Algorithm-style forward pass: jump at each observation time via the rho
// network, explicit Euler flow of the f network in between, readout
// everywhere. Throws numeric_error (with the step index) on non-finite state.
Trajectory forward_pass(const NjodeModel& model, ad::Tape& tape, const ObservationFramework& fw,
                        const ForwardOptions& opt = {});

// Pre-jump value at an observation time of the path; usage_error otherwise.
const Vec& left_limit_at(const Trajectory& traj, double t_i);

// Vertices of the interpolated path projected onto the model's signature
// coordinates (values, optional counts, time). Test hook for the incremental
// signature the forward pass maintains.
std::vector<Vec> signature_input_vertices(const ObservationFramework& fw, double t,
                                          bool include_u_coords);

// CSV export: path_id, t, coord, Y, is_observation, pre_or_post
void append_trajectory_csv(std::ostream& out, int path_id, const Trajectory& traj);
void write_trajectory_csv_header(std::ostream& out);

}  // namespace njode
