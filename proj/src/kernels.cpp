#include "flatgcd/kernels.hpp"

#include <cmath>
#include <cstring>

namespace flatgcd::kern {

namespace serial {

void matmul(double* c, const double* a, const double* b, size_t m, size_t k, size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_nt(double* c, const double* a, const double* b, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void matmul_tn(double* c, const double* a, const double* b, size_t m, size_t k, size_t n) {
    // Output row i of C(k,n) is a column of A; keep the accumulation order
    // over m fixed per output element.
    for (size_t i = 0; i < k; ++i) {
        double* ci = c + i * n;
        std::memset(ci, 0, n * sizeof(double));
        for (size_t p = 0; p < m; ++p) {
            const double api = a[p * k + i];
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

void pairwise_dist(double* dist, const double* x, size_t n, size_t d) {
    for (size_t i = 0; i < n; ++i) {
        const double* xi = x + i * d;
        for (size_t j = 0; j < n; ++j) {
            const double* xj = x + j * d;
            double ss = 0.0;
            for (size_t t = 0; t < d; ++t) {
                const double diff = xi[t] - xj[t];
                ss += diff * diff;
            }
            dist[i * n + j] = std::sqrt(ss);
        }
    }
}

} // namespace serial

namespace par {

void matmul(double* c, const double* a, const double* b, size_t m, size_t k, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        std::memset(ci, 0, n * sizeof(double));
        for (size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_nt(double* c, const double* a, const double* b, size_t m, size_t k, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void matmul_tn(double* c, const double* a, const double* b, size_t m, size_t k, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < k; ++i) {
        double* ci = c + i * n;
        std::memset(ci, 0, n * sizeof(double));
        for (size_t p = 0; p < m; ++p) {
            const double api = a[p * k + i];
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

void pairwise_dist(double* dist, const double* x, size_t n, size_t d) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) {
        const double* xi = x + i * d;
        for (size_t j = 0; j < n; ++j) {
            const double* xj = x + j * d;
            double ss = 0.0;
            for (size_t t = 0; t < d; ++t) {
                const double diff = xi[t] - xj[t];
                ss += diff * diff;
            }
            dist[i * n + j] = std::sqrt(ss);
        }
    }
}

} // namespace par

} // namespace flatgcd::kern
