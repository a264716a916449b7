#pragma once

#include <span>
#include <string>

#include "njode/common.hpp"
#include "njode/rng.hpp"

namespace njode::ad {

// Flat storage for all trainable tensors. Tensors are registered once, in a
// fixed order, so seeded initialisation and the gradient layout are stable.
class ParamStore {
public:
    struct Tensor {
        std::string name;
        int offset;
        int rows, cols;  // cols == 0 marks a vector
        bool is_bias;
    };

    int add_matrix(const std::string& name, int rows, int cols);
    int add_vector(const std::string& name, int size, bool is_bias);

    // uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], one stream per tensor
    void init_uniform(uint64_t seed);

    const Tensor& tensor(int id) const { return tensors_[id]; }
    int tensor_count() const { return static_cast<int>(tensors_.size()); }
    size_t size() const { return values_.size(); }
    Vec& values() { return values_; }
    const Vec& values() const { return values_; }
    const double* data(int id) const { return values_.data() + tensors_[id].offset; }
    double* data(int id) { return values_.data() + tensors_[id].offset; }

private:
    std::vector<Tensor> tensors_;
    Vec values_;
};

struct NodeRef {
    int32_t idx = -1;
    bool valid() const { return idx >= 0; }
};

// Per-network-call dropout: draws one keep/drop decision per hidden unit from
// the given stream. Inactive when rate == 0 or rng == nullptr.
struct DropoutCtx {
    CounterRng* rng = nullptr;
    double rate = 0.0;
    bool active() const { return rng != nullptr && rate > 0.0; }
};

// Append-only reverse-mode tape over vector-valued nodes. Values are computed
// eagerly on push; backward() walks the nodes once in reverse insertion order.
// Single-threaded by construction; use one tape per concurrent sample.
class Tape {
public:
    explicit Tape(const ParamStore& params) : params_(&params) {}

    NodeRef input(std::span<const double> v);
    NodeRef input(const Vec& v) { return input(std::span<const double>(v.data(), v.size())); }
    NodeRef scalar_input(double v) { return input(std::span<const double>(&v, 1)); }

    NodeRef linear(int weight_id, int bias_id, NodeRef x);
    NodeRef tanh(NodeRef x);
    NodeRef relu(NodeRef x);
    // radial clip to the ball of radius gamma; identity Jacobian inside and
    // on the boundary
    NodeRef radial_clip(NodeRef x, double gamma);
    NodeRef axpy(NodeRef base, double alpha, NodeRef dir);  // base + alpha * dir
    NodeRef scale(NodeRef x, double alpha);
    NodeRef concat(std::span<const NodeRef> parts);
    NodeRef slice(NodeRef x, int offset, int len);
    // mask (*) (target - y), with target/mask captured as constants
    NodeRef masked_residual(NodeRef y, std::span<const double> target, std::span<const double> mask);
    NodeRef norm2_eps(NodeRef x, double eps);  // scalar |x + eps|_2
    NodeRef sqnorm(NodeRef x);                 // scalar |x|_2^2
    NodeRef add(NodeRef a, NodeRef b);
    NodeRef square(NodeRef x);  // elementwise
    NodeRef weighted_sum(std::span<const NodeRef> terms, std::span<const double> weights);
    NodeRef dropout(NodeRef x, DropoutCtx& ctx);

    std::span<const double> value(NodeRef n) const;
    double scalar_value(NodeRef n) const;
    int dim(NodeRef n) const;

    // Reverse pass from a scalar seed node. Parameter gradients are
    // accumulated (+=) into param_grad, which must have ParamStore::size().
    void backward(NodeRef seed, double seed_value, std::span<double> param_grad);

    // adjoint of a node, valid after backward()
    std::span<const double> adjoint(NodeRef n) const;

    void reset();
    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : uint8_t {
        Input, Linear, Tanh, Relu, RadialClip, Axpy, Scale, Concat, Slice,
        MaskedResidual, Norm2Eps, SqNorm, Add, Square, WeightedSum, Dropout
    };

    struct Node {
        Op op;
        int32_t dim;
        int32_t voff;         // offset into the value/adjoint arena
        int32_t a = -1;       // first parent
        int32_t b = -1;       // second parent
        int32_t aux_i = 0;    // offset into aux_int_
        int32_t aux_d = 0;    // offset into aux_dbl_
        int32_t n_aux = 0;
        double c0 = 0.0;      // op scalar (alpha / eps / gamma / keep prob)
        int32_t wid = -1, bid = -1;
    };

    NodeRef push(Op op, int dim);
    double* vals(int idx) { return arena_.data() + nodes_[idx].voff; }
    const double* vals(int idx) const { return arena_.data() + nodes_[idx].voff; }
    double* adj(int idx) { return adj_.data() + nodes_[idx].voff; }

    const ParamStore* params_;
    std::vector<Node> nodes_;
    Vec arena_;
    Vec adj_;
    std::vector<int32_t> aux_int_;
    Vec aux_dbl_;
    bool has_adjoints_ = false;
};

enum class Activation { Tanh, Relu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct DenseNetConfig {
    int in = 0;
    int out = 0;
    std::vector<int> hidden;
    Activation act = Activation::Tanh;
};

// Feedforward network with Lipschitz activations; weights live in the shared
// ParamStore so several networks can be trained jointly.
class DenseNetwork {
public:
    DenseNetwork() = default;
    DenseNetwork(ParamStore& store, const std::string& name, DenseNetConfig cfg);

    NodeRef forward(Tape& tape, NodeRef x, DropoutCtx* dropout = nullptr) const;
    Vec forward_plain(const ParamStore& store, const Vec& x) const;

    const DenseNetConfig& config() const { return cfg_; }
    const std::vector<int>& weight_ids() const { return w_ids_; }
    const std::vector<int>& bias_ids() const { return b_ids_; }

private:
    DenseNetConfig cfg_;
    std::vector<int> w_ids_, b_ids_;
};

// Gamma_gamma(x) = x * min(1, gamma / |x|_2); plain-vector version of the
// tape op, for generators of expected values and non-tape callers.
Vec bounded_output(const Vec& x, double gamma);

}  // namespace njode::ad
