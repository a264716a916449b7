#include "njode/signature.hpp"

namespace njode {

int TruncatedSignature::level_size(int d, int k) {
    int s = 1;
    for (int i = 0; i < k; ++i) s *= d;
    return s;
}

int TruncatedSignature::sig_length(int d, int m) {
    int total = 0;
    for (int k = 0; k <= m; ++k) total += level_size(d, k);
    return total;
}

int TruncatedSignature::level_offset(int d, int k) { return sig_length(d, k - 1); }

TruncatedSignature TruncatedSignature::trivial(int d, int m) {
    TruncatedSignature s;
    s.dim = d;
    s.level = m;
    s.coeffs.assign(sig_length(d, m), 0.0);
    s.coeffs[0] = 1.0;
    return s;
}

static void check_caps(int d, int m) {
    if (m < 0) throw config_error("signature level must be >= 0");
    if (m > kMaxSignatureLevel) throw config_error("signature level exceeds cap of 5");
    if (d < 1) throw config_error("signature path dimension must be >= 1");
    if (TruncatedSignature::sig_length(d, m) > kMaxSignatureTerms)
        throw config_error("signature term count exceeds cap of 10^4");
}

TruncatedSignature linear_segment_signature(const Vec& increment, int level) {
    const int d = static_cast<int>(increment.size());
    check_caps(d, level);
    TruncatedSignature s = TruncatedSignature::trivial(d, level);
    // level k is the tensor power of level k-1 with the increment, scaled by 1/k
    int prev_off = 0, prev_len = 1;
    for (int k = 1; k <= level; ++k) {
        const int off = prev_off + prev_len;
        const double inv_k = 1.0 / k;
        for (int u = 0; u < prev_len; ++u) {
            const double base = s.coeffs[prev_off + u] * inv_k;
            for (int j = 0; j < d; ++j) s.coeffs[off + u * d + j] = base * increment[j];
        }
        prev_off = off;
        prev_len *= d;
    }
    return s;
}

TruncatedSignature chen_concatenate(const TruncatedSignature& a, const TruncatedSignature& b) {
    if (a.dim != b.dim || a.level != b.level)
        throw usage_error("chen_concatenate: signatures must share dimension and level");
    const int d = a.dim, m = a.level;
    TruncatedSignature c;
    c.dim = d;
    c.level = m;
    c.coeffs.assign(TruncatedSignature::sig_length(d, m), 0.0);
    for (int k = 0; k <= m; ++k) {
        const int off_k = TruncatedSignature::level_offset(d, k);
        for (int i = 0; i <= k; ++i) {
            const int j = k - i;
            const int off_i = TruncatedSignature::level_offset(d, i);
            const int off_j = TruncatedSignature::level_offset(d, j);
            const int len_i = TruncatedSignature::level_size(d, i);
            const int len_j = TruncatedSignature::level_size(d, j);
            // index of concatenated multi-index (u, v) is u * d^j + v
            for (int u = 0; u < len_i; ++u) {
                const double au = a.coeffs[off_i + u];
                if (au == 0.0) continue;
                const int row = off_k + u * len_j;
                for (int v = 0; v < len_j; ++v) c.coeffs[row + v] += au * b.coeffs[off_j + v];
            }
        }
    }
    return c;
}

TruncatedSignature path_signature(const std::vector<Vec>& vertices, int level) {
    if (vertices.empty()) throw usage_error("path_signature: empty vertex list");
    const int d = static_cast<int>(vertices[0].size());
    check_caps(d, level);
    TruncatedSignature s = TruncatedSignature::trivial(d, level);
    Vec inc(d);
    for (size_t v = 1; v < vertices.size(); ++v) {
        if (static_cast<int>(vertices[v].size()) != d)
            throw usage_error("path_signature: inconsistent vertex dimension");
        for (int j = 0; j < d; ++j) inc[j] = vertices[v][j] - vertices[v - 1][j];
        s = chen_concatenate(s, linear_segment_signature(inc, level));
    }
    return s;
}

}  // namespace njode
