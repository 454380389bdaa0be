// Times the serial reference kernels against the OpenMP variants and checks
// they agree bit-for-bit on the way.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "flatgcd/kernels.hpp"
#include "flatgcd/rng.hpp"

using namespace flatgcd;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: not enabled\n");
#endif
    std::printf("%-14s %8s %12s %12s %8s %s\n", "kernel", "size", "serial(ms)", "openmp(ms)", "speedup",
                "bit-equal");

    Rng rng(42);
    for (const size_t n : {64, 128, 256, 512}) {
        std::vector<double> a(n * n), b(n * n), c1(n * n), c2(n * n);
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal();

        const int reps = n <= 128 ? 20 : 5;
        const double ts = time_ms([&] { kern::serial::matmul(c1.data(), a.data(), b.data(), n, n, n); }, reps);
        const double tp = time_ms([&] { kern::par::matmul(c2.data(), a.data(), b.data(), n, n, n); }, reps);
        const bool equal = std::memcmp(c1.data(), c2.data(), n * n * sizeof(double)) == 0;
        std::printf("%-14s %8zu %12.3f %12.3f %8.2f %s\n", "matmul", n, ts, tp, ts / tp,
                    equal ? "yes" : "NO");
    }

    for (const size_t n : {256, 512, 1024}) {
        const size_t d = 32;
        std::vector<double> x(n * d), d1(n * n), d2(n * n);
        for (auto& v : x) v = rng.normal();

        const int reps = 10;
        const double ts = time_ms([&] { kern::serial::pairwise_dist(d1.data(), x.data(), n, d); }, reps);
        const double tp = time_ms([&] { kern::par::pairwise_dist(d2.data(), x.data(), n, d); }, reps);
        const bool equal = std::memcmp(d1.data(), d2.data(), n * n * sizeof(double)) == 0;
        std::printf("%-14s %8zu %12.3f %12.3f %8.2f %s\n", "pairwise_dist", n, ts, tp, ts / tp,
                    equal ? "yes" : "NO");
    }
    return 0;
}
