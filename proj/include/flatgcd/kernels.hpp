#pragma once

#include <cstddef>

namespace flatgcd::kern {

// Dense kernels behind the autodiff ops and the anchor-selection distance
// computations. Each kernel has a serial reference implementation and an
// OpenMP variant parallelized over output rows. Every output element is
// accumulated in a fixed serial order by exactly one thread, so the parallel
// results are bit-identical to the serial ones at any thread count.
//
// All matrices are row-major, caller-allocated.

namespace serial {

// C(m,n) = A(m,k) * B(k,n)
void matmul(double* c, const double* a, const double* b, size_t m, size_t k, size_t n);
// C(m,n) = A(m,k) * B(n,k)^T
void matmul_nt(double* c, const double* a, const double* b, size_t m, size_t k, size_t n);
// C(k,n) = A(m,k)^T * B(m,n)
void matmul_tn(double* c, const double* a, const double* b, size_t m, size_t k, size_t n);
// D(n,n) = Euclidean distances between rows of X(n,d)
void pairwise_dist(double* dist, const double* x, size_t n, size_t d);

} // namespace serial

namespace par {

void matmul(double* c, const double* a, const double* b, size_t m, size_t k, size_t n);
void matmul_nt(double* c, const double* a, const double* b, size_t m, size_t k, size_t n);
void matmul_tn(double* c, const double* a, const double* b, size_t m, size_t k, size_t n);
void pairwise_dist(double* dist, const double* x, size_t n, size_t d);

} // namespace par

// Dispatchers used by the rest of the library. They forward to the OpenMP
// variants (which degrade to the serial loop when OMP_NUM_THREADS=1 or
// OpenMP is absent).
inline void matmul(double* c, const double* a, const double* b, size_t m, size_t k, size_t n) {
    par::matmul(c, a, b, m, k, n);
}
inline void matmul_nt(double* c, const double* a, const double* b, size_t m, size_t k, size_t n) {
    par::matmul_nt(c, a, b, m, k, n);
}
inline void matmul_tn(double* c, const double* a, const double* b, size_t m, size_t k, size_t n) {
    par::matmul_tn(c, a, b, m, k, n);
}
inline void pairwise_dist(double* dist, const double* x, size_t n, size_t d) {
    par::pairwise_dist(dist, x, n, d);
}

} // namespace flatgcd::kern
