#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "flatgcd/rng.hpp"

using namespace flatgcd;

TEST_CASE("seeded streams reproduce exactly") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(123), d(124);
    bool all_equal = true;
    for (int i = 0; i < 16; ++i) all_equal &= c.next_u64() == d.next_u64();
    CHECK_FALSE(all_equal);
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
    Rng rng(0);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("normal moments are roughly standard") {
    Rng rng(7);
    const int n = 50000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle yields a permutation and is seed-deterministic") {
    std::vector<int> v(100), w(100);
    for (int i = 0; i < 100; ++i) v[i] = w[i] = i;
    Rng a(5), b(5);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("rademacher draws both signs") {
    Rng rng(9);
    int pos = 0, neg = 0;
    for (int i = 0; i < 1000; ++i) (rng.rademacher() > 0 ? pos : neg)++;
    CHECK(pos > 400);
    CHECK(neg > 400);
}
