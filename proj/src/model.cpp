#include "njode/model.hpp"

#include <cmath>
#include <ostream>

namespace njode {

void ModelConfig::validate() const {
    if (d_x < 1) throw config_error("ModelConfig: d_x must be >= 1");
    if (d_h < 1) throw config_error("ModelConfig: d_h must be >= 1");
    if (residual_readout && d_h < d_x)
        throw config_error("ModelConfig: residual readout needs d_h >= d_x");
    if (gamma1 <= 0.0 || gamma2 <= 0.0) throw config_error("ModelConfig: gamma bounds must be > 0");
    if (dt <= 0.0) throw config_error("ModelConfig: dt must be > 0");
    if (sig_level < 0 || sig_level > kMaxSignatureLevel)
        throw config_error("ModelConfig: signature level out of range");
    if (sig_len() > kMaxSignatureTerms)
        throw config_error("ModelConfig: signature term count exceeds cap");
}

NjodeModel::NjodeModel(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    f_net_ = ad::DenseNetwork(params_, "f",
                              {cfg_.f_input_dim(), cfg_.d_h, cfg_.f_hidden, cfg_.activation});
    rho_net_ = ad::DenseNetwork(params_, "rho",
                                {cfg_.rho_input_dim(), cfg_.d_h, cfg_.rho_hidden, cfg_.activation});
    readout_net_ = ad::DenseNetwork(params_, "readout",
                                    {cfg_.d_h, cfg_.d_x, cfg_.readout_hidden, cfg_.activation});
}

namespace {

void check_finite(const std::span<const double>& v, long step, double t) {
    for (double x : v)
        if (!std::isfinite(x))
            throw numeric_error("forward_pass: non-finite latent state at step " +
                                std::to_string(step) + ", t=" + fmt17(t));
}

}  // namespace

Trajectory forward_pass(const NjodeModel& model, ad::Tape& tape, const ObservationFramework& fw,
                        const ForwardOptions& opt) {
    const ModelConfig& cfg = model.config();
    if (fw.d_x() != cfg.d_x) throw config_error("forward_pass: path dimension mismatch");
    const int d = cfg.d_x;
    const int n = fw.n();
    const double T = fw.horizon();

    ad::DropoutCtx dropout = opt.dropout;
    ad::DropoutCtx* dctx = dropout.active() ? &dropout : nullptr;

    // running truncated signature of the projected interpolated path; the
    // signature is a function of the data only, so it enters the tape as a
    // constant input
    const int sd = cfg.sig_path_dim();
    TruncatedSignature sig = TruncatedSignature::trivial(sd, cfg.sig_level);
    Vec held = fw.values()[0];  // last observed value per coordinate
    Vec ucount(d, 1.0);         // coordinate-wise observation counts (all seen at 0)
    auto make_vertex = [&](double s) {
        Vec v(sd);
        for (int j = 0; j < d; ++j) v[j] = held[j];
        if (cfg.include_u_coords)
            for (int j = 0; j < d; ++j) v[d + j] = ucount[j];
        v[sd - 1] = s;
        return v;
    };
    Vec prev_vertex = make_vertex(0.0);

    const Vec& x0 = fw.values()[0];
    const ad::NodeRef x0_node = tape.input(x0);
    const Vec zero_h(cfg.d_h, 0.0);
    const ad::NodeRef zero_h_node = tape.input(zero_h);

    Trajectory traj;
    long step_count = 0;

    auto readout = [&](ad::NodeRef h) {
        ad::NodeRef y = model.readout_net().forward(tape, h, dctx);
        if (cfg.residual_readout) y = tape.add(y, tape.slice(h, 0, d));
        return y;
    };
    auto record_grid = [&](double t, ad::NodeRef y, bool is_obs) {
        traj.grid_times.push_back(t);
        Vec v(tape.value(y).begin(), tape.value(y).end());
        traj.grid_post.push_back(v);
        traj.grid_left.push_back(std::move(v));
        traj.grid_is_obs.push_back(is_obs ? 1 : 0);
    };

    ad::NodeRef H;  // current latent node
    ad::NodeRef sig_node;

    for (int i = 0; i <= n; ++i) {
        const double t_i = fw.times()[i];
        const Mask& mask = fw.masks()[i];

        // left limit at t_i (for i >= 1; the initial jump has no pre-state)
        if (i >= 1) {
            ad::NodeRef y_left = readout(H);
            traj.obs_times.push_back(t_i);
            traj.obs_left_node.push_back(y_left);
            traj.obs_left.emplace_back(tape.value(y_left).begin(), tape.value(y_left).end());
            record_grid(t_i, y_left, true);

            // extend the signature by the (linear) segment up to t_i; the new
            // vertex carries the just-observed coordinates
            for (int j = 0; j < d; ++j)
                if (mask[j]) {
                    held[j] = fw.values()[i][j];
                    ucount[j] += 1.0;
                }
            Vec vertex = make_vertex(t_i);
            Vec inc(sd);
            for (int j = 0; j < sd; ++j) inc[j] = vertex[j] - prev_vertex[j];
            sig = chen_concatenate(sig, linear_segment_signature(inc, cfg.sig_level));
            prev_vertex = std::move(vertex);
        }

        // jump: H_{t_i} = clip(rho(H_{t_i-}, t_i, signature, X0, values, mask))
        sig_node = tape.input(sig.coeffs);
        const ad::NodeRef t_node = tape.scalar_input(t_i);
        const ad::NodeRef obs_node = tape.input(held);
        Vec mask_d(mask.begin(), mask.end());
        const ad::NodeRef mask_node = tape.input(mask_d);
        const ad::NodeRef h_in = (i == 0 || !cfg.recurrent_rho) ? zero_h_node : H;
        const ad::NodeRef parts[] = {h_in, t_node, sig_node, x0_node, obs_node, mask_node};
        ad::NodeRef rho_out = model.rho_net().forward(tape, tape.concat(parts), dctx);
        H = tape.radial_clip(rho_out, cfg.gamma2);
        check_finite(tape.value(H), step_count, t_i);

        ad::NodeRef y_post = readout(H);
        traj.obs_post_node.push_back(y_post);
        traj.obs_post.emplace_back(tape.value(y_post).begin(), tape.value(y_post).end());
        if (i == 0) {
            traj.obs_times.push_back(0.0);
            traj.obs_left_node.push_back(y_post);
            traj.obs_left.push_back(traj.obs_post.back());
            record_grid(0.0, y_post, true);
        } else {
            traj.grid_post.back().assign(tape.value(y_post).begin(), tape.value(y_post).end());
        }

        // Euler flow on (t_i, t_next] with inputs frozen at t_i
        const double t_next = (i == n) ? T : fw.times()[i + 1];
        const double span = t_next - t_i;
        if (span <= 1e-15) continue;
        long full = static_cast<long>(std::floor(span / cfg.dt + 1e-9));
        double rem = span - full * cfg.dt;
        if (rem < 1e-9) rem = 0.0;
        const long total = full + (rem > 0.0 ? 1 : 0);
        const ad::NodeRef tau_node = tape.scalar_input(t_i);
        for (long k = 0; k < total; ++k) {
            const double s = t_i + k * cfg.dt;
            const double s_end = (k + 1 == total) ? t_next : t_i + (k + 1) * cfg.dt;
            const ad::NodeRef s_node = tape.scalar_input(s);
            const ad::NodeRef fparts[] = {H, s_node, tau_node, sig_node, x0_node};
            ad::NodeRef f_out = model.f_net().forward(tape, tape.concat(fparts), dctx);
            f_out = tape.radial_clip(f_out, cfg.gamma1);
            H = tape.axpy(H, s_end - s, f_out);
            ++step_count;
            check_finite(tape.value(H), step_count, s_end);
            const bool at_obs = (i < n) && (k + 1 == total);
            if (!at_obs && opt.record_grid) record_grid(s_end, readout(H), false);
        }
    }
    return traj;
}

const Vec& left_limit_at(const Trajectory& traj, double t_i) {
    for (size_t i = 0; i < traj.obs_times.size(); ++i)
        if (std::abs(traj.obs_times[i] - t_i) <= 1e-12) return traj.obs_left[i];
    throw usage_error("left_limit_at: t is not an observation time of this trajectory");
}

std::vector<Vec> signature_input_vertices(const ObservationFramework& fw, double t,
                                          bool include_u_coords) {
    InterpolatedPath path = vertex_list(fw, t);
    const int d = fw.d_x();
    std::vector<Vec> out;
    for (const Vec& v : path.vertices) {
        Vec p;
        p.insert(p.end(), v.begin(), v.begin() + d);
        if (include_u_coords) p.insert(p.end(), v.begin() + d, v.begin() + 2 * d);
        p.push_back(v[2 * d]);
        out.push_back(std::move(p));
    }
    return out;
}

void write_trajectory_csv_header(std::ostream& out) {
    out << "path_id,t,coord,Y,is_observation,pre_or_post\n";
}

void append_trajectory_csv(std::ostream& out, int path_id, const Trajectory& traj) {
    for (size_t k = 0; k < traj.grid_times.size(); ++k) {
        const bool is_obs = traj.grid_is_obs[k] != 0;
        for (size_t c = 0; c < traj.grid_left[k].size(); ++c) {
            out << path_id << ',' << fmt17(traj.grid_times[k]) << ',' << c << ','
                << fmt17(traj.grid_left[k][c]) << ',' << (is_obs ? 1 : 0) << ",pre\n";
            if (is_obs)
                out << path_id << ',' << fmt17(traj.grid_times[k]) << ',' << c << ','
                    << fmt17(traj.grid_post[k][c]) << ",1,post\n";
        }
    }
}

}  // namespace njode
