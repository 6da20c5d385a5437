#pragma once

#include <cstdint>

namespace omni::kernels {

// Dense kernels behind the autodiff ops. Each output element is reduced
// serially left-to-right over k, so results are bit-identical for any
// thread count. The *_serial variants are the reference implementations
// used by tests and the kernel benchmark.

// C[m x n] = A[m x k] * B[k x n]
void matmul_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// C[m x n] = A[k x m]^T * B[k x n]
void matmul_at_b_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_at_b(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// C[m x n] = A[m x k] * B[n x k]^T
void matmul_a_bt_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_a_bt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

}  // namespace omni::kernels
