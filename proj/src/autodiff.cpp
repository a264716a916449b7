#include "njode/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace njode::ad {

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

int ParamStore::add_matrix(const std::string& name, int rows, int cols) {
    if (rows < 1 || cols < 1) throw config_error("ParamStore: bad matrix shape for " + name);
    tensors_.push_back({name, static_cast<int>(values_.size()), rows, cols, false});
    values_.resize(values_.size() + static_cast<size_t>(rows) * cols, 0.0);
    return static_cast<int>(tensors_.size()) - 1;
}

int ParamStore::add_vector(const std::string& name, int size, bool is_bias) {
    if (size < 1) throw config_error("ParamStore: bad vector size for " + name);
    tensors_.push_back({name, static_cast<int>(values_.size()), size, 0, is_bias});
    values_.resize(values_.size() + size, 0.0);
    return static_cast<int>(tensors_.size()) - 1;
}

void ParamStore::init_uniform(uint64_t seed) {
    for (size_t id = 0; id < tensors_.size(); ++id) {
        const Tensor& t = tensors_[id];
        // biases share the fan-in of the matrix registered just before them
        int fan_in = t.cols;
        if (t.cols == 0 && id > 0) fan_in = tensors_[id - 1].cols;
        if (fan_in < 1) fan_in = t.rows;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        CounterRng rng(seed, streams::path_stream(streams::kInit, id));
        const size_t count = static_cast<size_t>(t.rows) * (t.cols == 0 ? 1 : t.cols);
        for (size_t k = 0; k < count; ++k)
            values_[t.offset + k] = bound * (2.0 * rng.next_uniform() - 1.0);
    }
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

NodeRef Tape::push(Op op, int dim) {
    Node n;
    n.op = op;
    n.dim = dim;
    n.voff = static_cast<int32_t>(arena_.size());
    arena_.resize(arena_.size() + dim);
    nodes_.push_back(n);
    has_adjoints_ = false;
    return NodeRef{static_cast<int32_t>(nodes_.size()) - 1};
}

NodeRef Tape::input(std::span<const double> v) {
    NodeRef r = push(Op::Input, static_cast<int>(v.size()));
    std::memcpy(vals(r.idx), v.data(), v.size() * sizeof(double));
    return r;
}

NodeRef Tape::linear(int weight_id, int bias_id, NodeRef x) {
    const ParamStore::Tensor& w = params_->tensor(weight_id);
    const ParamStore::Tensor& b = params_->tensor(bias_id);
    if (w.cols != dim(x)) throw config_error("linear: input dimension mismatch");
    if (b.rows != w.rows) throw config_error("linear: bias dimension mismatch");
    NodeRef r = push(Op::Linear, w.rows);
    Node& n = nodes_[r.idx];
    n.a = x.idx;
    n.wid = weight_id;
    n.bid = bias_id;
    const double* W = params_->data(weight_id);
    const double* bias = params_->data(bias_id);
    const double* xv = vals(x.idx);
    double* y = vals(r.idx);
    const int in = w.cols;
    for (int row = 0; row < w.rows; ++row) {
        const double* wr = W + static_cast<size_t>(row) * in;
        double acc = bias[row];
        for (int c = 0; c < in; ++c) acc += wr[c] * xv[c];
        y[row] = acc;
    }
    return r;
}

NodeRef Tape::tanh(NodeRef x) {
    NodeRef r = push(Op::Tanh, dim(x));
    nodes_[r.idx].a = x.idx;
    const double* xv = vals(x.idx);
    double* y = vals(r.idx);
    for (int i = 0; i < dim(x); ++i) y[i] = std::tanh(xv[i]);
    return r;
}

NodeRef Tape::relu(NodeRef x) {
    NodeRef r = push(Op::Relu, dim(x));
    nodes_[r.idx].a = x.idx;
    const double* xv = vals(x.idx);
    double* y = vals(r.idx);
    for (int i = 0; i < dim(x); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    return r;
}

NodeRef Tape::radial_clip(NodeRef x, double gamma) {
    if (gamma <= 0.0) throw config_error("radial_clip: gamma must be > 0");
    NodeRef r = push(Op::RadialClip, dim(x));
    Node& n = nodes_[r.idx];
    n.a = x.idx;
    n.c0 = gamma;
    const double* xv = vals(x.idx);
    double* y = vals(r.idx);
    double sq = 0.0;
    for (int i = 0; i < n.dim; ++i) sq += xv[i] * xv[i];
    const double norm = std::sqrt(sq);
    const double f = norm > gamma ? gamma / norm : 1.0;
    for (int i = 0; i < n.dim; ++i) y[i] = f * xv[i];
    return r;
}

NodeRef Tape::axpy(NodeRef base, double alpha, NodeRef dir) {
    if (dim(base) != dim(dir)) throw usage_error("axpy: dimension mismatch");
    NodeRef r = push(Op::Axpy, dim(base));
    Node& n = nodes_[r.idx];
    n.a = base.idx;
    n.b = dir.idx;
    n.c0 = alpha;
    const double* bv = vals(base.idx);
    const double* dv = vals(dir.idx);
    double* y = vals(r.idx);
    for (int i = 0; i < n.dim; ++i) y[i] = bv[i] + alpha * dv[i];
    return r;
}

NodeRef Tape::scale(NodeRef x, double alpha) {
    NodeRef r = push(Op::Scale, dim(x));
    Node& n = nodes_[r.idx];
    n.a = x.idx;
    n.c0 = alpha;
    const double* xv = vals(x.idx);
    double* y = vals(r.idx);
    for (int i = 0; i < n.dim; ++i) y[i] = alpha * xv[i];
    return r;
}

NodeRef Tape::concat(std::span<const NodeRef> parts) {
    int total = 0;
    for (NodeRef p : parts) total += dim(p);
    NodeRef r = push(Op::Concat, total);
    Node& n = nodes_[r.idx];
    n.aux_i = static_cast<int32_t>(aux_int_.size());
    n.n_aux = static_cast<int32_t>(parts.size());
    for (NodeRef p : parts) aux_int_.push_back(p.idx);
    double* y = vals(r.idx);
    int off = 0;
    for (NodeRef p : parts) {
        std::memcpy(y + off, vals(p.idx), dim(p) * sizeof(double));
        off += dim(p);
    }
    return r;
}

NodeRef Tape::slice(NodeRef x, int offset, int len) {
    if (offset < 0 || len < 1 || offset + len > dim(x)) throw usage_error("slice: out of range");
    NodeRef r = push(Op::Slice, len);
    Node& n = nodes_[r.idx];
    n.a = x.idx;
    n.aux_i = static_cast<int32_t>(aux_int_.size());
    aux_int_.push_back(offset);
    std::memcpy(vals(r.idx), vals(x.idx) + offset, len * sizeof(double));
    return r;
}

NodeRef Tape::masked_residual(NodeRef y, std::span<const double> target,
                              std::span<const double> mask) {
    const int d = dim(y);
    if (static_cast<int>(target.size()) != d || static_cast<int>(mask.size()) != d)
        throw usage_error("masked_residual: dimension mismatch");
    NodeRef r = push(Op::MaskedResidual, d);
    Node& n = nodes_[r.idx];
    n.a = y.idx;
    n.aux_d = static_cast<int32_t>(aux_dbl_.size());
    aux_dbl_.insert(aux_dbl_.end(), target.begin(), target.end());
    aux_dbl_.insert(aux_dbl_.end(), mask.begin(), mask.end());
    const double* yv = vals(y.idx);
    double* out = vals(r.idx);
    for (int i = 0; i < d; ++i) out[i] = mask[i] * (target[i] - yv[i]);
    return r;
}

NodeRef Tape::norm2_eps(NodeRef x, double eps) {
    NodeRef r = push(Op::Norm2Eps, 1);
    Node& n = nodes_[r.idx];
    n.a = x.idx;
    n.c0 = eps;
    const double* xv = vals(x.idx);
    double sq = 0.0;
    for (int i = 0; i < dim(x); ++i) {
        const double v = xv[i] + eps;
        sq += v * v;
    }
    vals(r.idx)[0] = std::sqrt(sq);
    return r;
}

NodeRef Tape::sqnorm(NodeRef x) {
    NodeRef r = push(Op::SqNorm, 1);
    nodes_[r.idx].a = x.idx;
    const double* xv = vals(x.idx);
    double sq = 0.0;
    for (int i = 0; i < dim(x); ++i) sq += xv[i] * xv[i];
    vals(r.idx)[0] = sq;
    return r;
}

NodeRef Tape::add(NodeRef a, NodeRef b) { return axpy(a, 1.0, b); }

NodeRef Tape::square(NodeRef x) {
    NodeRef r = push(Op::Square, dim(x));
    nodes_[r.idx].a = x.idx;
    const double* xv = vals(x.idx);
    double* y = vals(r.idx);
    for (int i = 0; i < dim(x); ++i) y[i] = xv[i] * xv[i];
    return r;
}

NodeRef Tape::weighted_sum(std::span<const NodeRef> terms, std::span<const double> weights) {
    if (terms.size() != weights.size()) throw usage_error("weighted_sum: size mismatch");
    NodeRef r = push(Op::WeightedSum, 1);
    Node& n = nodes_[r.idx];
    n.aux_i = static_cast<int32_t>(aux_int_.size());
    n.aux_d = static_cast<int32_t>(aux_dbl_.size());
    n.n_aux = static_cast<int32_t>(terms.size());
    double acc = 0.0;
    for (size_t k = 0; k < terms.size(); ++k) {
        if (dim(terms[k]) != 1) throw usage_error("weighted_sum: terms must be scalars");
        aux_int_.push_back(terms[k].idx);
        aux_dbl_.push_back(weights[k]);
        acc += weights[k] * vals(terms[k].idx)[0];
    }
    vals(r.idx)[0] = acc;
    return r;
}

NodeRef Tape::dropout(NodeRef x, DropoutCtx& ctx) {
    if (!ctx.active()) return x;
    const int d = dim(x);
    NodeRef r = push(Op::Dropout, d);
    Node& n = nodes_[r.idx];
    n.a = x.idx;
    n.aux_d = static_cast<int32_t>(aux_dbl_.size());
    const double keep = 1.0 - ctx.rate;
    const double* xv = vals(x.idx);
    double* y = vals(r.idx);
    for (int i = 0; i < d; ++i) {
        const double f = ctx.rng->next_bernoulli(keep) ? 1.0 / keep : 0.0;
        aux_dbl_.push_back(f);
        y[i] = f * xv[i];
    }
    return r;
}

std::span<const double> Tape::value(NodeRef n) const {
    return {vals(n.idx), static_cast<size_t>(nodes_[n.idx].dim)};
}

double Tape::scalar_value(NodeRef n) const {
    if (nodes_[n.idx].dim != 1) throw usage_error("scalar_value: node is not scalar");
    return vals(n.idx)[0];
}

int Tape::dim(NodeRef n) const {
    if (!n.valid() || n.idx >= static_cast<int32_t>(nodes_.size()))
        throw usage_error("tape: invalid node reference");
    return nodes_[n.idx].dim;
}

std::span<const double> Tape::adjoint(NodeRef n) const {
    if (!has_adjoints_) throw usage_error("adjoint: backward() has not run");
    return {adj_.data() + nodes_[n.idx].voff, static_cast<size_t>(nodes_[n.idx].dim)};
}

void Tape::backward(NodeRef seed, double seed_value, std::span<double> param_grad) {
    if (dim(seed) != 1) throw usage_error("backward: seed node must be scalar");
    if (param_grad.size() != params_->size())
        throw usage_error("backward: gradient buffer size mismatch");
    adj_.assign(arena_.size(), 0.0);
    adj_[nodes_[seed.idx].voff] = seed_value;
    for (int32_t idx = seed.idx; idx >= 0; --idx) {
        const Node& n = nodes_[idx];
        const double* g = adj_.data() + n.voff;
        bool any = false;
        for (int i = 0; i < n.dim; ++i)
            if (g[i] != 0.0) { any = true; break; }
        if (!any) continue;
        switch (n.op) {
            case Op::Input:
                break;
            case Op::Linear: {
                const ParamStore::Tensor& w = params_->tensor(n.wid);
                const double* W = params_->data(n.wid);
                const double* xv = vals(n.a);
                double* gx = adj(n.a);
                double* gW = param_grad.data() + w.offset;
                double* gb = param_grad.data() + params_->tensor(n.bid).offset;
                const int in = w.cols;
                for (int row = 0; row < w.rows; ++row) {
                    const double gr = g[row];
                    if (gr == 0.0) continue;
                    gb[row] += gr;
                    const double* wr = W + static_cast<size_t>(row) * in;
                    double* gWr = gW + static_cast<size_t>(row) * in;
                    for (int c = 0; c < in; ++c) {
                        gx[c] += wr[c] * gr;
                        gWr[c] += xv[c] * gr;
                    }
                }
                break;
            }
            case Op::Tanh: {
                const double* y = vals(idx);
                double* gx = adj(n.a);
                for (int i = 0; i < n.dim; ++i) gx[i] += (1.0 - y[i] * y[i]) * g[i];
                break;
            }
            case Op::Relu: {
                const double* y = vals(idx);
                double* gx = adj(n.a);
                for (int i = 0; i < n.dim; ++i)
                    if (y[i] > 0.0) gx[i] += g[i];
                break;
            }
            case Op::RadialClip: {
                const double* xv = vals(n.a);
                double* gx = adj(n.a);
                double sq = 0.0;
                for (int i = 0; i < n.dim; ++i) sq += xv[i] * xv[i];
                const double norm = std::sqrt(sq);
                if (norm <= n.c0) {
                    for (int i = 0; i < n.dim; ++i) gx[i] += g[i];
                } else {
                    const double f = n.c0 / norm;
                    double xg = 0.0;
                    for (int i = 0; i < n.dim; ++i) xg += xv[i] * g[i];
                    const double k = f * xg / sq;
                    for (int i = 0; i < n.dim; ++i) gx[i] += f * g[i] - k * xv[i];
                }
                break;
            }
            case Op::Axpy: {
                double* ga = adj(n.a);
                double* gb2 = adj(n.b);
                for (int i = 0; i < n.dim; ++i) {
                    ga[i] += g[i];
                    gb2[i] += n.c0 * g[i];
                }
                break;
            }
            case Op::Scale: {
                double* gx = adj(n.a);
                for (int i = 0; i < n.dim; ++i) gx[i] += n.c0 * g[i];
                break;
            }
            case Op::Concat: {
                int off = 0;
                for (int k = 0; k < n.n_aux; ++k) {
                    const int32_t p = aux_int_[n.aux_i + k];
                    double* gp = adj(p);
                    const int pd = nodes_[p].dim;
                    for (int i = 0; i < pd; ++i) gp[i] += g[off + i];
                    off += pd;
                }
                break;
            }
            case Op::Slice: {
                const int off = aux_int_[n.aux_i];
                double* gx = adj(n.a);
                for (int i = 0; i < n.dim; ++i) gx[off + i] += g[i];
                break;
            }
            case Op::MaskedResidual: {
                const double* mask = aux_dbl_.data() + n.aux_d + n.dim;
                double* gy = adj(n.a);
                for (int i = 0; i < n.dim; ++i) gy[i] -= mask[i] * g[i];
                break;
            }
            case Op::Norm2Eps: {
                const double norm = vals(idx)[0];
                if (norm > 0.0) {
                    const double* xv = vals(n.a);
                    double* gx = adj(n.a);
                    const double s = g[0] / norm;
                    const int pd = nodes_[n.a].dim;
                    for (int i = 0; i < pd; ++i) gx[i] += s * (xv[i] + n.c0);
                }
                break;
            }
            case Op::SqNorm: {
                const double* xv = vals(n.a);
                double* gx = adj(n.a);
                const double s = 2.0 * g[0];
                const int pd = nodes_[n.a].dim;
                for (int i = 0; i < pd; ++i) gx[i] += s * xv[i];
                break;
            }
            case Op::Square: {
                const double* xv = vals(n.a);
                double* gx = adj(n.a);
                for (int i = 0; i < n.dim; ++i) gx[i] += 2.0 * xv[i] * g[i];
                break;
            }
            case Op::WeightedSum: {
                for (int k = 0; k < n.n_aux; ++k) {
                    const int32_t p = aux_int_[n.aux_i + k];
                    adj_[nodes_[p].voff] += aux_dbl_[n.aux_d + k] * g[0];
                }
                break;
            }
            case Op::Dropout: {
                const double* f = aux_dbl_.data() + n.aux_d;
                double* gx = adj(n.a);
                for (int i = 0; i < n.dim; ++i) gx[i] += f[i] * g[i];
                break;
            }
        }
    }
    has_adjoints_ = true;
}

void Tape::reset() {
    nodes_.clear();
    arena_.clear();
    adj_.clear();
    aux_int_.clear();
    aux_dbl_.clear();
    has_adjoints_ = false;
}

// ---------------------------------------------------------------------------
// DenseNetwork
// ---------------------------------------------------------------------------

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw config_error("unknown activation: " + s);
}

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

DenseNetwork::DenseNetwork(ParamStore& store, const std::string& name, DenseNetConfig cfg)
    : cfg_(std::move(cfg)) {
    if (cfg_.in < 1 || cfg_.out < 1) throw config_error("DenseNetwork " + name + ": bad in/out width");
    int prev = cfg_.in;
    for (size_t l = 0; l < cfg_.hidden.size(); ++l) {
        const int width = cfg_.hidden[l];
        if (width < 1) throw config_error("DenseNetwork " + name + ": bad hidden width");
        const std::string tag = name + ".h" + std::to_string(l);
        w_ids_.push_back(store.add_matrix(tag + ".W", width, prev));
        b_ids_.push_back(store.add_vector(tag + ".b", width, true));
        prev = width;
    }
    w_ids_.push_back(store.add_matrix(name + ".out.W", cfg_.out, prev));
    b_ids_.push_back(store.add_vector(name + ".out.b", cfg_.out, true));
}

NodeRef DenseNetwork::forward(Tape& tape, NodeRef x, DropoutCtx* dropout) const {
    if (tape.dim(x) != cfg_.in) throw config_error("DenseNetwork::forward: input width mismatch");
    NodeRef h = x;
    const size_t n_hidden = w_ids_.size() - 1;
    for (size_t l = 0; l < n_hidden; ++l) {
        h = tape.linear(w_ids_[l], b_ids_[l], h);
        h = cfg_.act == Activation::Tanh ? tape.tanh(h) : tape.relu(h);
        if (dropout != nullptr) h = tape.dropout(h, *dropout);
    }
    return tape.linear(w_ids_.back(), b_ids_.back(), h);
}

Vec DenseNetwork::forward_plain(const ParamStore& store, const Vec& x) const {
    if (static_cast<int>(x.size()) != cfg_.in)
        throw config_error("DenseNetwork::forward_plain: input width mismatch");
    Vec h = x;
    for (size_t l = 0; l < w_ids_.size(); ++l) {
        const ParamStore::Tensor& w = store.tensor(w_ids_[l]);
        const double* W = store.data(w_ids_[l]);
        const double* b = store.data(b_ids_[l]);
        Vec y(w.rows);
        for (int row = 0; row < w.rows; ++row) {
            double acc = b[row];
            const double* wr = W + static_cast<size_t>(row) * w.cols;
            for (int c = 0; c < w.cols; ++c) acc += wr[c] * h[c];
            y[row] = acc;
        }
        if (l + 1 < w_ids_.size()) {
            for (double& v : y) v = cfg_.act == Activation::Tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
        }
        h = std::move(y);
    }
    return h;
}

Vec bounded_output(const Vec& x, double gamma) {
    if (gamma <= 0.0) throw config_error("bounded_output: gamma must be > 0");
    const double n = norm2(x);
    if (n <= gamma) return x;
    Vec y(x.size());
    const double f = gamma / n;
    for (size_t i = 0; i < x.size(); ++i) y[i] = f * x[i];
    return y;
}

}  // namespace njode::ad
