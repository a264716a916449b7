#include <cmath>

#include "doctest.h"
#include "njode/rng.hpp"
#include "njode/signature.hpp"
#include "support/quadrature.hpp"

using namespace njode;
using njode::testsupport::quadrature_signature;

namespace {

std::vector<Vec> random_path(CounterRng& rng, int d, int n_vertices) {
    std::vector<Vec> v(n_vertices, Vec(d));
    for (auto& p : v)
        for (int j = 0; j < d; ++j) p[j] = 2.0 * rng.next_uniform() - 1.0;
    return v;
}

}  // namespace

TEST_CASE("linear segment signature: zero increment is trivial") {
    for (int d : {1, 2, 3}) {
        Vec zero(d, 0.0);
        TruncatedSignature s = linear_segment_signature(zero, 3);
        CHECK(s.coeffs[0] == 1.0);
        for (size_t i = 1; i < s.coeffs.size(); ++i) CHECK(s.coeffs[i] == 0.0);
    }
}

TEST_CASE("linear segment signature: 1-d increment 2, level 3") {
    TruncatedSignature s = linear_segment_signature(Vec{2.0}, 3);
    REQUIRE(s.coeffs.size() == 4);
    CHECK(s.coeffs[0] == doctest::Approx(1.0));
    CHECK(s.coeffs[1] == doctest::Approx(2.0));
    CHECK(s.coeffs[2] == doctest::Approx(2.0));
    CHECK(s.coeffs[3] == doctest::Approx(4.0 / 3.0));
    // cross-check against numeric iterated integration
    Vec q = quadrature_signature({Vec{0.0}, Vec{2.0}}, 3);
    for (size_t i = 0; i < q.size(); ++i) CHECK(s.coeffs[i] == doctest::Approx(q[i]).epsilon(1e-8));
}

TEST_CASE("signature dimension formula") {
    CHECK(TruncatedSignature::sig_length(2, 3) == 15);  // (2^4 - 1)/(2 - 1)
    for (int d = 1; d <= 4; ++d)
        for (int m = 0; m <= 5; ++m) {
            const int expected = d == 1 ? m + 1 : (static_cast<int>(std::pow(d, m + 1)) - 1) / (d - 1);
            CHECK(TruncatedSignature::sig_length(d, m) == expected);
            CHECK(static_cast<int>(TruncatedSignature::trivial(d, m).coeffs.size()) == expected);
        }
}

TEST_CASE("chen: trivial signature is the identity element") {
    CounterRng rng(7, 0);
    std::vector<Vec> path = random_path(rng, 2, 4);
    TruncatedSignature s = path_signature(path, 3);
    TruncatedSignature e = TruncatedSignature::trivial(2, 3);
    TruncatedSignature left = chen_concatenate(s, e);
    TruncatedSignature right = chen_concatenate(e, s);
    for (size_t i = 0; i < s.coeffs.size(); ++i) {
        CHECK(left.coeffs[i] == doctest::Approx(s.coeffs[i]).epsilon(1e-14));
        CHECK(right.coeffs[i] == doctest::Approx(s.coeffs[i]).epsilon(1e-14));
    }
}

TEST_CASE("chen: collinear 1-d segments merge to a single segment") {
    TruncatedSignature a = linear_segment_signature(Vec{1.0}, 2);
    TruncatedSignature c = chen_concatenate(a, a);
    TruncatedSignature m = linear_segment_signature(Vec{2.0}, 2);
    REQUIRE(c.coeffs.size() == 3);
    CHECK(c.coeffs[0] == doctest::Approx(1.0));
    CHECK(c.coeffs[1] == doctest::Approx(2.0));
    CHECK(c.coeffs[2] == doctest::Approx(2.0));
    for (size_t i = 0; i < c.coeffs.size(); ++i)
        CHECK(c.coeffs[i] == doctest::Approx(m.coeffs[i]).epsilon(1e-14));
}

TEST_CASE("chen vs quadrature oracle on a random 2-d two-segment path") {
    CounterRng rng(13, 1);
    std::vector<Vec> path = random_path(rng, 2, 3);
    TruncatedSignature s = path_signature(path, 3);
    Vec q = quadrature_signature(path, 3);
    REQUIRE(s.coeffs.size() == q.size());
    for (size_t i = 0; i < q.size(); ++i) CHECK(std::abs(s.coeffs[i] - q[i]) < 1e-8);
}

TEST_CASE("chen mismatched dim or level is a usage error") {
    TruncatedSignature a = TruncatedSignature::trivial(2, 3);
    CHECK_THROWS_AS(chen_concatenate(a, TruncatedSignature::trivial(3, 3)), usage_error);
    CHECK_THROWS_AS(chen_concatenate(a, TruncatedSignature::trivial(2, 2)), usage_error);
}

TEST_CASE("path signature: single vertex and monotone 1-d path") {
    TruncatedSignature t = path_signature({Vec{0.3}}, 3);
    CHECK(t.coeffs == Vec{1.0, 0.0, 0.0, 0.0});
    TruncatedSignature s = path_signature({Vec{0.0}, Vec{1.0}, Vec{3.0}}, 2);
    REQUIRE(s.coeffs.size() == 3);
    CHECK(s.coeffs[0] == doctest::Approx(1.0));
    CHECK(s.coeffs[1] == doctest::Approx(3.0));
    CHECK(s.coeffs[2] == doctest::Approx(4.5));
    CHECK_THROWS_AS(path_signature({}, 2), usage_error);
}

TEST_CASE("time-augmented path: antisymmetric level-2 part equals the signed area") {
    // vertices (t, x): the antisymmetrised level-2 coefficient is the signed
    // (Levy) area between the path and its chord, computable by the shoelace
    // formula relative to the chord closure
    std::vector<Vec> path{{0.0, 0.0}, {0.25, 0.7}, {0.6, -0.2}, {1.0, 0.5}};
    TruncatedSignature s = path_signature(path, 2);
    const int d = 2;
    const int off = TruncatedSignature::level_offset(d, 2);
    const double antisym = 0.5 * (s.coeffs[off + 0 * d + 1] - s.coeffs[off + 1 * d + 0]);
    // shoelace over the closed polygon path + chord back to the start
    double area = 0.0;
    for (size_t i = 0; i + 1 < path.size(); ++i)
        area += path[i][0] * path[i + 1][1] - path[i + 1][0] * path[i][1];
    area += path.back()[0] * path.front()[1] - path.front()[0] * path.back()[1];
    area *= 0.5;
    CHECK(std::abs(antisym - area) < 1e-10);
}

TEST_CASE("property: Chen identity on random concatenated paths") {
    CounterRng rng(101, 2);
    for (int rep = 0; rep < 40; ++rep) {
        const int d = 1 + static_cast<int>(rng.next_u64() % 3);
        const int m = 1 + static_cast<int>(rng.next_u64() % 3);
        std::vector<Vec> p1 = random_path(rng, d, 2 + static_cast<int>(rng.next_u64() % 4));
        std::vector<Vec> p2 = random_path(rng, d, 2 + static_cast<int>(rng.next_u64() % 4));
        p2[0] = p1.back();  // shared junction point
        std::vector<Vec> joined = p1;
        joined.insert(joined.end(), p2.begin() + 1, p2.end());
        TruncatedSignature whole = path_signature(joined, m);
        TruncatedSignature glued = chen_concatenate(path_signature(p1, m), path_signature(p2, m));
        for (size_t i = 0; i < whole.coeffs.size(); ++i)
            CHECK(std::abs(whole.coeffs[i] - glued.coeffs[i]) < 1e-10);
    }
}

TEST_CASE("property: scaling multiplies level k by lambda^k") {
    CounterRng rng(55, 3);
    std::vector<Vec> path = random_path(rng, 2, 5);
    const double lambda = 0.7;
    std::vector<Vec> scaled = path;
    for (auto& v : scaled)
        for (double& x : v) x *= lambda;
    TruncatedSignature s = path_signature(path, 4);
    TruncatedSignature t = path_signature(scaled, 4);
    for (int k = 0; k <= 4; ++k) {
        const int off = TruncatedSignature::level_offset(2, k);
        const int len = TruncatedSignature::level_size(2, k);
        const double f = std::pow(lambda, k);
        for (int i = 0; i < len; ++i)
            CHECK(t.coeffs[off + i] == doctest::Approx(f * s.coeffs[off + i]).epsilon(1e-10));
    }
}

TEST_CASE("property: inserting a vertex on a segment leaves the signature unchanged") {
    CounterRng rng(77, 4);
    for (int rep = 0; rep < 20; ++rep) {
        const int d = 1 + static_cast<int>(rng.next_u64() % 3);
        std::vector<Vec> path = random_path(rng, d, 4);
        const size_t seg = rng.next_u64() % 3;
        const double frac = rng.next_uniform();
        Vec mid(d);
        for (int j = 0; j < d; ++j)
            mid[j] = path[seg][j] + frac * (path[seg + 1][j] - path[seg][j]);
        std::vector<Vec> refined = path;
        refined.insert(refined.begin() + seg + 1, mid);
        TruncatedSignature a = path_signature(path, 3);
        TruncatedSignature b = path_signature(refined, 3);
        for (size_t i = 0; i < a.coeffs.size(); ++i)
            CHECK(std::abs(a.coeffs[i] - b.coeffs[i]) < 1e-12);
    }
}

TEST_CASE("caps: level and term count are enforced") {
    CHECK_THROWS_AS(linear_segment_signature(Vec{1.0}, 6), config_error);
    Vec big(10, 1.0);
    CHECK_THROWS_AS(linear_segment_signature(big, 5), config_error);  // 10^5 + ... terms
}
