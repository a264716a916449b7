#pragma once

#include <cmath>
#include <cstdint>

namespace njode {

// Counter-based generator: the k-th variate of a stream is a pure function of
// (seed, stream, k). Streams never interact, so per-path process/noise/mask
// randomness stays independent and the draw order inside one stream is the
// only ordering that matters for reproducibility.
class CounterRng {
public:
    CounterRng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

    uint64_t next_u64() { return mix3(seed_, stream_, counter_++); }

    // uniform in [0, 1)
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; consumes exactly two counters per call
    double next_gaussian() {
        double u1 = 1.0 - next_uniform();  // (0, 1], log-safe
        double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    bool next_bernoulli(double p) { return next_uniform() < p; }

    // Poisson by inversion; consumes one counter per call. Intended for small
    // means (grid increments), where the linear cdf walk is short.
    int next_poisson(double mean) {
        double u = next_uniform();
        double pmf = std::exp(-mean);
        double cdf = pmf;
        int k = 0;
        while (u >= cdf && k < 10000) {
            ++k;
            pmf *= mean / k;
            cdf += pmf;
        }
        return k;
    }

    uint64_t counter() const { return counter_; }

private:
    static uint64_t splitmix(uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    static uint64_t mix3(uint64_t a, uint64_t b, uint64_t c) {
        return splitmix(splitmix(splitmix(a) ^ b) ^ c);
    }

    uint64_t seed_;
    uint64_t stream_;
    uint64_t counter_ = 0;
};

// Named stream ids so call sites cannot silently collide.
namespace streams {
// per-path streams: hash-combine the purpose with the path index
inline uint64_t path_stream(uint64_t purpose, uint64_t path_index) {
    return purpose * 0x100000001B3ull + path_index;
}
constexpr uint64_t kProcess = 1;
constexpr uint64_t kNoise = 2;
constexpr uint64_t kMask = 3;
constexpr uint64_t kInit = 4;      // weight initialisation
constexpr uint64_t kShuffle = 5;   // epoch shuffling
constexpr uint64_t kDropout = 6;   // per (epoch, path) dropout masks
}  // namespace streams

}  // namespace njode
