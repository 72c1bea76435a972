// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "adgen/tensor.hpp"

namespace adgen {

// Central finite-difference gradient verification. The numeric side never
// touches the tape, so it is an independent oracle for the backward rules.

using TensorFn = std::function<Tensor(Tape&, const Tensor&)>;
using LossFn = std::function<Tensor(Tape&)>;

// Compares the tape gradient of the scalar function f at x against central
// differences with the given step. Returns the max relative error with
// denominator max(|analytic|, |numeric|, 1e-8).
double grad_check(const TensorFn& f, const Tensor& x, double step = 1e-5);

// Same check for a scalar loss over a set of parameter leaves: one backward
// pass for the analytic gradients, then per-element central differences
// (parameters are perturbed in place and restored).
double grad_check_params(const LossFn& loss_fn, const std::vector<Tensor>& params,
                         double step = 1e-5);

}  // namespace adgen
