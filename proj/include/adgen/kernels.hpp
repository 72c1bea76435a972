// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace adgen::kernels {

// Hot compute loops, parallelized with OpenMP over independent output rows.
// Every kernel computes each output element with a fixed serial reduction
// order, so results are bitwise identical to the serial reference below for
// any thread count.
//
// matmul_nn: C[m x n]  = A[m x k] * B[k x n]        (+= if accumulate)
// matmul_nt: C[m x n]  = A[m x k] * B[n x k]^T
// matmul_tn: C[m x n]  = A[k x m]^T * B[k x n]
// softmax_rows: row-wise softmax with max subtraction, x and y may alias.

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);

// Serial reference implementations, kept for correctness tests and the
// kernel benchmark.
namespace serial {
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);
}  // namespace serial

}  // namespace adgen::kernels
