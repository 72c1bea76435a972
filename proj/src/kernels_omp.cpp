// SPDX-License-Identifier: Apache-2.0
#include "adgen/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kernels_common.hpp"

// Parallel variants. Work is split over output rows only and every per-row
// reduction goes through the shared detail:: loops, so outputs are bitwise
// identical to the serial reference regardless of thread count. Small
// problems stay serial via the if() clause to avoid fork/join overhead.

namespace adgen::kernels {

namespace {
// Below this, fork/join overhead beats the parallel gain; such calls are
// routed straight to the serial reference and never touch the OpenMP
// runtime.
constexpr std::size_t kParallelFlops = 1u << 18;
}

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (m * k * n < kParallelFlops || m < 2) {
        serial::matmul_nn(a, b, c, m, k, n, accumulate);
        return;
    }
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        double* ci = c + i * n;
        if (!accumulate) std::memset(ci, 0, n * sizeof(double));
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) detail::row_axpy(ai[p], b + p * n, ci, n);
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (m * k * n < kParallelFlops || m < 2) {
        serial::matmul_nt(a, b, c, m, k, n, accumulate);
        return;
    }
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double acc = detail::dot(ai, b + j * k, k);
            ci[j] = accumulate ? ci[j] + acc : acc;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (m * k * n < kParallelFlops || m < 2) {
        serial::matmul_tn(a, b, c, m, k, n, accumulate);
        return;
    }
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        double* ci = c + i * n;
        if (!accumulate) std::memset(ci, 0, n * sizeof(double));
        for (std::size_t p = 0; p < k; ++p) detail::row_axpy(a[p * m + i], b + p * n, ci, n);
    }
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
    if (rows * cols < (1u << 13) || rows < 2) {
        serial::softmax_rows(x, y, rows, cols);
        return;
    }
#pragma omp parallel for schedule(static)
    for (long long rr = 0; rr < static_cast<long long>(rows); ++rr) {
        const std::size_t r = static_cast<std::size_t>(rr);
        const double* xr = x + r * cols;
        double* yr = y + r * cols;
        double mx = xr[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

}  // namespace adgen::kernels
