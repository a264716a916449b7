#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace njode {

using Vec = std::vector<double>;
using Mask = std::vector<uint8_t>;

// Bad configuration values (shapes, ranges, incompatible settings). CLI exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse (wrong call order, invalid argument for this object's state).
struct usage_error : std::logic_error {
    using std::logic_error::logic_error;
};

// Non-finite values or failed numerics at runtime. CLI exit code 3.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(const Vec& a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

// shortest text that round-trips a float64 (17 significant digits)
inline std::string fmt17(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace njode
