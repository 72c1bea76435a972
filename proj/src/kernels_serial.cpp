// SPDX-License-Identifier: Apache-2.0
#include "adgen/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kernels_common.hpp"

namespace adgen::kernels::serial {

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        if (!accumulate) std::memset(ci, 0, n * sizeof(double));
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) detail::row_axpy(ai[p], b + p * n, ci, n);
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
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
    // a is k x m, b is k x n, c is m x n
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        if (!accumulate) std::memset(ci, 0, n * sizeof(double));
        for (std::size_t p = 0; p < k; ++p) detail::row_axpy(a[p * m + i], b + p * n, ci, n);
    }
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
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

}  // namespace adgen::kernels::serial
