#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "njode/model.hpp"

using namespace njode;

namespace {

// tiny model; gammas large so clipping stays inactive unless asked for
ModelConfig tiny_config(int d_x = 1, int d_h = 1) {
    ModelConfig cfg;
    cfg.d_x = d_x;
    cfg.d_h = d_h;
    cfg.f_hidden = {};
    cfg.rho_hidden = {};
    cfg.readout_hidden = {};
    cfg.activation = ad::Activation::Tanh;
    cfg.sig_level = 2;
    cfg.residual_readout = false;
    cfg.gamma1 = 1e6;
    cfg.gamma2 = 1e6;
    cfg.dt = 0.5;
    return cfg;
}

// make the readout the identity map (requires d_h == d_x and linear readout)
void set_identity_readout(NjodeModel& model) {
    const ad::DenseNetwork& g = model.readout_net();
    const ad::ParamStore::Tensor& w = model.params().tensor(g.weight_ids()[0]);
    for (int i = 0; i < std::min(w.rows, w.cols); ++i)
        model.params().data(g.weight_ids()[0])[i * w.cols + i] = 1.0;
}

// constant vector field: zero weights, bias c on the f output layer
void set_constant_field(NjodeModel& model, double c) {
    const ad::DenseNetwork& f = model.f_net();
    const ad::ParamStore::Tensor& b = model.params().tensor(f.bias_ids().back());
    for (int i = 0; i < b.rows; ++i) model.params().data(f.bias_ids().back())[i] = c;
}

ObservationFramework lone_obs(double value = 0.0) {
    return ObservationFramework(1, 1.0, {0.0}, {Vec{value}}, {Mask{1}});
}

}  // namespace

TEST_CASE("zero f and rho ignoring H: piecewise constant output") {
    NjodeModel model(tiny_config());  // all weights zero
    ObservationFramework fw(1, 1.0, {0.0, 0.4, 0.8}, {Vec{0.1}, Vec{0.5}, Vec{-0.2}},
                            {Mask{1}, Mask{1}, Mask{1}});
    ad::Tape tape(model.params());
    Trajectory traj = forward_pass(model, tape, fw, {});
    // f == 0 keeps H constant between observations; rho == 0 maps every jump
    // to H = 0, so Y == 0 everywhere
    for (const Vec& y : traj.grid_left) CHECK(y[0] == 0.0);
    for (const Vec& y : traj.grid_post) CHECK(y[0] == 0.0);
}

TEST_CASE("constant field without further observations: Y_T = Y_0 + c T exactly") {
    ModelConfig cfg = tiny_config();
    cfg.dt = 0.01;
    NjodeModel model(cfg);
    set_identity_readout(model);
    set_constant_field(model, 0.7);
    ObservationFramework fw = lone_obs(0.0);
    ad::Tape tape(model.params());
    Trajectory traj = forward_pass(model, tape, fw, {});
    // rho == 0 puts H_0 = 0; Euler is exact for a constant field
    CHECK(traj.grid_left.back()[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(traj.grid_times.back() == doctest::Approx(1.0));
}

TEST_CASE("hand-set one-observation example: two Euler steps of size 0.5") {
    NjodeModel model(tiny_config());  // dt = 0.5
    set_identity_readout(model);
    set_constant_field(model, 1.0);
    ObservationFramework fw = lone_obs();
    ad::Tape tape(model.params());
    Trajectory traj = forward_pass(model, tape, fw, {});
    REQUIRE(traj.grid_times.size() == 3);
    CHECK(traj.grid_times[0] == 0.0);
    CHECK(traj.grid_times[1] == 0.5);
    CHECK(traj.grid_times[2] == 1.0);
    CHECK(traj.grid_left[0][0] == doctest::Approx(0.0));
    CHECK(traj.grid_left[1][0] == doctest::Approx(0.5));
    CHECK(traj.grid_left[2][0] == doctest::Approx(1.0));
}

TEST_CASE("left_limit_at: lookup and errors") {
    NjodeModel model(tiny_config());
    set_identity_readout(model);
    set_constant_field(model, 2.0);
    ObservationFramework fw(1, 1.0, {0.0, 0.5}, {Vec{0.0}, Vec{0.0}}, {Mask{1}, Mask{1}});
    ad::Tape tape(model.params());
    Trajectory traj = forward_pass(model, tape, fw, {});
    // constant field c: left limit at 0.5 is previous post-jump value + c * 0.5
    CHECK(left_limit_at(traj, 0.5)[0] == doctest::Approx(1.0));
    CHECK_THROWS_AS(left_limit_at(traj, 0.25), usage_error);
}

TEST_CASE("jump locations: no spurious jumps away from observation times") {
    ModelConfig cfg = tiny_config(1, 4);
    cfg.f_hidden = {8};
    cfg.rho_hidden = {8};
    cfg.dt = 0.02;
    cfg.residual_readout = true;
    NjodeModel model(cfg);
    model.init_weights(123);
    ObservationFramework fw(1, 1.0, {0.0, 0.26, 0.74}, {Vec{0.3}, Vec{-0.4}, Vec{0.8}},
                            {Mask{1}, Mask{1}, Mask{1}});
    ad::Tape tape(model.params());
    Trajectory traj = forward_pass(model, tape, fw, {});
    double max_flow_step = 0.0;
    for (size_t k = 1; k < traj.grid_times.size(); ++k) {
        const double dy = std::abs(traj.grid_left[k][0] - traj.grid_post[k - 1][0]);
        max_flow_step = std::max(max_flow_step, dy);
    }
    // flow increments are O(dt); jumps at observations may be O(1)
    CHECK(max_flow_step < 0.2);
    for (size_t k = 0; k < traj.grid_times.size(); ++k)
        if (!traj.grid_is_obs[k]) CHECK(traj.grid_left[k] == traj.grid_post[k]);
}

TEST_CASE("bounded updates: f increments and rho outputs respect the gammas") {
    ModelConfig cfg = tiny_config(1, 1);
    cfg.f_hidden = {6};
    cfg.rho_hidden = {6};
    cfg.gamma1 = 0.05;
    cfg.gamma2 = 0.4;
    cfg.dt = 0.1;
    NjodeModel model(cfg);
    model.init_weights(7);
    set_identity_readout(model);  // Y mirrors the latent state
    // blow up the raw network outputs so both clips are active
    for (int id : model.f_net().bias_ids())
        for (int i = 0; i < model.params().tensor(id).rows; ++i) model.params().data(id)[i] += 5.0;
    for (int id : model.rho_net().bias_ids())
        for (int i = 0; i < model.params().tensor(id).rows; ++i) model.params().data(id)[i] += 5.0;
    ObservationFramework fw(1, 1.0, {0.0, 0.5}, {Vec{0.2}, Vec{0.9}}, {Mask{1}, Mask{1}});
    ad::Tape tape(model.params());
    Trajectory traj = forward_pass(model, tape, fw, {});
    for (const Vec& h : traj.obs_post) CHECK(std::abs(h[0]) <= cfg.gamma2 + 1e-12);
    for (size_t k = 1; k < traj.grid_times.size(); ++k) {
        const double step = traj.grid_times[k] - traj.grid_times[k - 1];
        const double dh = std::abs(traj.grid_left[k][0] - traj.grid_post[k - 1][0]);
        CHECK(dh <= cfg.gamma1 * step + 1e-12);
    }
}

TEST_CASE("euler convergence: halving dt roughly halves the deviation") {
    ModelConfig cfg = tiny_config(1, 3);
    cfg.f_hidden = {6};
    cfg.rho_hidden = {6};
    cfg.activation = ad::Activation::Tanh;
    cfg.residual_readout = true;
    NjodeModel model_a(cfg);
    model_a.init_weights(99);
    ObservationFramework fw(1, 1.0, {0.0, 0.35}, {Vec{0.4}, Vec{-0.6}}, {Mask{1}, Mask{1}});

    auto terminal = [&](double dt) {
        ModelConfig c2 = cfg;
        c2.dt = dt;
        NjodeModel m(c2);
        m.params().values() = model_a.params().values();
        ad::Tape tape(m.params());
        Trajectory traj = forward_pass(m, tape, fw, {});
        return traj.grid_left.back()[0];
    };
    const double ref = terminal(0.0025);
    const double e1 = std::abs(terminal(0.02) - ref);
    const double e2 = std::abs(terminal(0.01) - ref);
    CHECK(e2 < 0.75 * e1);  // O(dt) convergence
    CHECK(e1 < 0.1);
}

TEST_CASE("causality: changing future observations leaves the past unchanged") {
    ModelConfig cfg = tiny_config(1, 4);
    cfg.f_hidden = {8};
    cfg.rho_hidden = {8};
    cfg.dt = 0.05;
    NjodeModel model(cfg);
    model.init_weights(5);
    ObservationFramework fw(1, 1.0, {0.0, 0.3, 0.75}, {Vec{0.1}, Vec{0.6}, Vec{0.9}},
                            {Mask{1}, Mask{1}, Mask{1}});
    ObservationFramework fw2(1, 1.0, {0.0, 0.3, 0.75}, {Vec{0.1}, Vec{0.6}, Vec{-3.0}},
                             {Mask{1}, Mask{1}, Mask{1}});
    ad::Tape t1(model.params()), t2(model.params());
    Trajectory a = forward_pass(model, t1, fw, {});
    Trajectory b = forward_pass(model, t2, fw2, {});
    for (size_t k = 0; k < a.grid_times.size(); ++k) {
        if (a.grid_times[k] > 0.75 - 1e-12) break;
        CHECK(a.grid_left[k] == b.grid_left[k]);
    }
}

TEST_CASE("incremental signature equals full recomputation") {
    // the forward pass maintains the signature via chen concatenation; verify
    // against path_signature over the projected vertex list at each
    // observation time by instrumenting a model whose rho reads the signature
    for (bool with_u : {false, true}) {
        ModelConfig cfg = tiny_config(2, 2);
        cfg.sig_level = 3;
        cfg.include_u_coords = with_u;
        ObservationFramework fw(2, 1.0, {0.0, 0.2, 0.5, 0.9},
                                {Vec{0.1, -0.3}, Vec{0.7, 0.0}, Vec{0.0, 0.4}, Vec{0.2, 0.2}},
                                {Mask{1, 1}, Mask{1, 0}, Mask{0, 1}, Mask{1, 1}});
        // reference: full recomputation from the interpolated path vertices
        for (double t : fw.times()) {
            std::vector<Vec> verts = signature_input_vertices(fw, t, with_u);
            TruncatedSignature full = path_signature(verts, cfg.sig_level);
            // incremental version: replicate what forward_pass does
            TruncatedSignature inc = TruncatedSignature::trivial(cfg.sig_path_dim(), cfg.sig_level);
            Vec held = fw.values()[0];
            Vec ucount(2, 1.0);
            Vec prev(cfg.sig_path_dim());
            auto vertex = [&](double s) {
                Vec v(cfg.sig_path_dim());
                v[0] = held[0]; v[1] = held[1];
                if (with_u) { v[2] = ucount[0]; v[3] = ucount[1]; }
                v[cfg.sig_path_dim() - 1] = s;
                return v;
            };
            prev = vertex(0.0);
            for (size_t i = 1; i < fw.times().size() && fw.times()[i] <= t; ++i) {
                for (int j = 0; j < 2; ++j)
                    if (fw.masks()[i][j]) { held[j] = fw.values()[i][j]; ucount[j] += 1.0; }
                Vec v = vertex(fw.times()[i]);
                Vec d(v.size());
                for (size_t j = 0; j < v.size(); ++j) d[j] = v[j] - prev[j];
                inc = chen_concatenate(inc, linear_segment_signature(d, cfg.sig_level));
                prev = v;
            }
            REQUIRE(full.coeffs.size() == inc.coeffs.size());
            for (size_t j = 0; j < full.coeffs.size(); ++j)
                CHECK(full.coeffs[j] == doctest::Approx(inc.coeffs[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("non-finite state raises a numeric error with the step index") {
    ModelConfig cfg = tiny_config();
    cfg.dt = 0.25;
    NjodeModel model(cfg);
    set_constant_field(model, std::numeric_limits<double>::quiet_NaN());
    ObservationFramework fw = lone_obs();
    ad::Tape tape(model.params());
    CHECK_THROWS_AS(forward_pass(model, tape, fw, {}), numeric_error);
}

TEST_CASE("trajectory csv export has the documented schema") {
    NjodeModel model(tiny_config());
    ObservationFramework fw(1, 1.0, {0.0, 0.5}, {Vec{0.0}, Vec{1.0}}, {Mask{1}, Mask{1}});
    ad::Tape tape(model.params());
    Trajectory traj = forward_pass(model, tape, fw, {});
    std::ostringstream out;
    write_trajectory_csv_header(out);
    append_trajectory_csv(out, 3, traj);
    const std::string text = out.str();
    CHECK(text.rfind("path_id,t,coord,Y,is_observation,pre_or_post\n", 0) == 0);
    CHECK(text.find(",post\n") != std::string::npos);
    CHECK(text.find("3,0.5,0,") != std::string::npos);
}
