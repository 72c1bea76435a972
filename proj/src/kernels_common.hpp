// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

// Shared inner loops for the serial and OpenMP kernel variants. Both
// variants must produce bitwise-identical results, so any reassociation
// (the 4-lane dot below) is fixed here, once.

namespace adgen::kernels::detail {

// Dot product with four independent accumulator chains: a fixed summation
// order that the compiler can map onto SIMD lanes without fast-math.
inline double dot(const double* __restrict__ a, const double* __restrict__ b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t p = 0;
    for (; p + 4 <= n; p += 4) {
        s0 += a[p] * b[p];
        s1 += a[p + 1] * b[p + 1];
        s2 += a[p + 2] * b[p + 2];
        s3 += a[p + 3] * b[p + 3];
    }
    for (; p < n; ++p) s0 += a[p] * b[p];
    return (s0 + s1) + (s2 + s3);
}

inline void row_axpy(double av, const double* __restrict__ b, double* __restrict__ c,
                     std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
}

}  // namespace adgen::kernels::detail
