#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "flatgcd/kernels.hpp"
#include "flatgcd/rng.hpp"

using namespace flatgcd;

TEST_CASE("matmul on a hand example") {
    const double a[] = {1, 2, 3, 4};
    const double b[] = {1, 1};
    double c[2] = {0, 0};
    kern::matmul(c, a, b, 2, 2, 1);
    CHECK(c[0] == 3.0);
    CHECK(c[1] == 7.0);
}

TEST_CASE("transposed variants agree with explicit transposes") {
    Rng rng(7);
    const size_t m = 5, k = 4, n = 6;
    std::vector<double> a(m * k), b(n * k), bt(k * n);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < k; ++j) bt[j * n + i] = b[i * k + j];

    std::vector<double> c1(m * n), c2(m * n);
    kern::matmul(c1.data(), a.data(), bt.data(), m, k, n);
    kern::matmul_nt(c2.data(), a.data(), b.data(), m, k, n);
    for (size_t i = 0; i < m * n; ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-12));

    std::vector<double> at(k * m);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];
    std::vector<double> d(m * m), d2(m * m);
    kern::matmul(d.data(), a.data(), at.data(), m, k, m);
    // A * A^T via matmul_tn on transposed operands: (A^T)^T * A^T
    kern::matmul_tn(d2.data(), at.data(), at.data(), k, m, m);
    for (size_t i = 0; i < m * m; ++i) CHECK(d[i] == doctest::Approx(d2[i]).epsilon(1e-12));
}

TEST_CASE("serial and openmp kernels are bit-identical") {
    Rng rng(13);
    for (const size_t n : {3, 17, 64, 129}) {
        std::vector<double> a(n * n), b(n * n), cs(n * n), cp(n * n);
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal();

        kern::serial::matmul(cs.data(), a.data(), b.data(), n, n, n);
        kern::par::matmul(cp.data(), a.data(), b.data(), n, n, n);
        CHECK(std::memcmp(cs.data(), cp.data(), n * n * sizeof(double)) == 0);

        kern::serial::matmul_nt(cs.data(), a.data(), b.data(), n, n, n);
        kern::par::matmul_nt(cp.data(), a.data(), b.data(), n, n, n);
        CHECK(std::memcmp(cs.data(), cp.data(), n * n * sizeof(double)) == 0);

        kern::serial::matmul_tn(cs.data(), a.data(), b.data(), n, n, n);
        kern::par::matmul_tn(cp.data(), a.data(), b.data(), n, n, n);
        CHECK(std::memcmp(cs.data(), cp.data(), n * n * sizeof(double)) == 0);
    }

    const size_t n = 200, d = 16;
    std::vector<double> x(n * d), ds(n * n), dp(n * n);
    for (auto& v : x) v = rng.normal();
    kern::serial::pairwise_dist(ds.data(), x.data(), n, d);
    kern::par::pairwise_dist(dp.data(), x.data(), n, d);
    CHECK(std::memcmp(ds.data(), dp.data(), n * n * sizeof(double)) == 0);
}

TEST_CASE("pairwise distances: symmetry and zero diagonal") {
    Rng rng(3);
    const size_t n = 40, d = 8;
    std::vector<double> x(n * d), dist(n * n);
    for (auto& v : x) v = rng.normal();
    kern::pairwise_dist(dist.data(), x.data(), n, d);
    for (size_t i = 0; i < n; ++i) {
        CHECK(dist[i * n + i] == 0.0);
        for (size_t j = 0; j < n; ++j) CHECK(dist[i * n + j] == dist[j * n + i]);
    }
}
