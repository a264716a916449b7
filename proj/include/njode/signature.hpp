#pragma once

#include "njode/common.hpp"

namespace njode {

// Truncated signature of a continuous piecewise-linear path: levels 0..m,
// flattened level-major with lexicographic multi-indices inside each level.
// Level 0 is the constant 1.
struct TruncatedSignature {
    int dim = 0;    // path dimension d
    int level = 0;  // truncation order m
    Vec coeffs;     // length = sig_length(dim, level)

    static int level_size(int d, int k);            // d^k
    static int sig_length(int d, int m);            // sum of level sizes
    static int level_offset(int d, int k);          // offset of level k block

    static TruncatedSignature trivial(int d, int m);  // (1, 0, ..., 0)
};

// Caps guarding combinatorial growth; exceeding either is a config error.
constexpr int kMaxSignatureLevel = 5;
constexpr int kMaxSignatureTerms = 10000;

// Signature of a single linear segment with the given increment: the level-k
// block is the k-fold tensor power of the increment divided by k!.
TruncatedSignature linear_segment_signature(const Vec& increment, int level);

// Truncated tensor-algebra product (Chen): level-k of the result is
// sum over i+j=k of a_i (x) b_j. Both inputs must share dim and level.
TruncatedSignature chen_concatenate(const TruncatedSignature& a, const TruncatedSignature& b);

// Signature of the piecewise-linear path through the given vertices.
// A single vertex yields the trivial signature.
TruncatedSignature path_signature(const std::vector<Vec>& vertices, int level);

}  // namespace njode
