#pragma once

#include "njode/signature.hpp"

// Independent oracle for the iterated integrals: S_k obeys dS_k =
// S_{k-1} (x) dX, integrated level-by-level with the midpoint rule on a fine
// grid. Ignorant of Chen's identity and the tensor-power closed form.
namespace njode::testsupport {

inline std::vector<Vec> quadrature_signature_levels(const std::vector<Vec>& vertices, int level,
                                                    int steps_per_segment = 12000) {
    const int d = static_cast<int>(vertices[0].size());
    std::vector<Vec> s(level + 1);
    s[0] = Vec{1.0};
    for (int k = 1; k <= level; ++k) s[k].assign(TruncatedSignature::level_size(d, k), 0.0);
    for (size_t seg = 0; seg + 1 < vertices.size(); ++seg) {
        Vec inc(d);
        for (int j = 0; j < d; ++j)
            inc[j] = (vertices[seg + 1][j] - vertices[seg][j]) / steps_per_segment;
        for (int step = 0; step < steps_per_segment; ++step) {
            std::vector<Vec> half = s;
            for (int k = level; k >= 1; --k) {
                const int lower = static_cast<int>(half[k - 1].size());
                for (int u = 0; u < lower; ++u)
                    for (int j = 0; j < d; ++j) half[k][u * d + j] += 0.5 * half[k - 1][u] * inc[j];
            }
            for (int k = level; k >= 1; --k) {
                const int lower = static_cast<int>(half[k - 1].size());
                for (int u = 0; u < lower; ++u)
                    for (int j = 0; j < d; ++j) s[k][u * d + j] += half[k - 1][u] * inc[j];
            }
        }
    }
    return s;
}

inline Vec quadrature_signature(const std::vector<Vec>& vertices, int level,
                                int steps_per_segment = 12000) {
    Vec out;
    for (const auto& l : quadrature_signature_levels(vertices, level, steps_per_segment))
        out.insert(out.end(), l.begin(), l.end());
    return out;
}

}  // namespace njode::testsupport
