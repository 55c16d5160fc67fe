#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "tailforge/rng.hpp"

using namespace tailforge;

TEST_CASE("pcg32 matches the published reference sequence") {
    // First outputs of the canonical PCG32 demo for seed 42, stream 54.
    Rng rng(42, 54);
    CHECK(rng.next_u32() == 0xa15c02b7u);
    CHECK(rng.next_u32() == 0x7b47f409u);
    CHECK(rng.next_u32() == 0xba1d3330u);
    CHECK(rng.next_u32() == 0x83d2f293u);
    CHECK(rng.next_u32() == 0xbfa4784bu);
    CHECK(rng.next_u32() == 0xcbed606eu);
}

TEST_CASE("same seed and stream reproduce the sequence") {
    Rng a(123, 7), b(123, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());
}

TEST_CASE("different streams from the same seed are distinct") {
    Rng a(123, 0), b(123, 1);
    int same = 0;
    for (int i = 0; i < 64; ++i) {
        if (a.next_u32() == b.next_u32()) ++same;
    }
    CHECK(same < 4);
}

TEST_CASE("uniform stays in [0,1) with a sane mean") {
    Rng rng(1);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // 4 sigma of the mean of n uniforms: 4 / sqrt(12 n).
    CHECK(std::abs(sum / n - 0.5) < 4.0 / std::sqrt(12.0 * n));
}

TEST_CASE("uniform(lo,hi) respects the interval") {
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        double u = rng.uniform(-3.0, -1.0);
        CHECK(u >= -3.0);
        CHECK(u <= -1.0);
    }
}

TEST_CASE("uniform_int stays below the bound and covers it") {
    Rng rng(3);
    std::set<std::uint32_t> seen;
    for (int i = 0; i < 2000; ++i) {
        std::uint32_t v = rng.uniform_int(7);
        REQUIRE(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK(rng.uniform_int(1) == 0);
    CHECK(rng.uniform_int(0) == 0);
}

TEST_CASE("normal approximation has the right first two moments") {
    Rng rng(4);
    const int n = 20000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        REQUIRE(std::abs(x) <= 6.0);  // Irwin-Hall 12-sum support
        sum += x;
        sum2 += x * x;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("beta_symmetric stays in [0,1] and alpha=1 is uniform") {
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) {
        double x = a.beta_symmetric(0.2);
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
    CHECK(a.beta_symmetric(1.0) == b.uniform());  // same draw path
}

TEST_CASE("shuffle permutes without losing elements") {
    Rng rng(6);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<int> shuffled = v;
    rng.shuffle(shuffled);
    std::vector<int> sorted = shuffled;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == v);
}

TEST_CASE("mix64 and derive_seed separate nearby inputs") {
    CHECK(mix64(0) != mix64(1));
    CHECK(derive_seed(0, 0, 0) != derive_seed(0, 0, 1));
    CHECK(derive_seed(0, 0, 0) != derive_seed(0, 1, 0));
    CHECK(derive_seed(0, 0, 0) != derive_seed(1, 0, 0));
    CHECK(derive_seed(42, 7, 3) == derive_seed(42, 7, 3));
}
