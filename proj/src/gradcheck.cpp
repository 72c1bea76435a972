// SPDX-License-Identifier: Apache-2.0
#include "adgen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace adgen {

namespace {
double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}
}  // namespace

double grad_check(const TensorFn& f, const Tensor& x, double step) {
    // Analytic gradient via the tape.
    Tensor leaf = x.clone(/*requires_grad=*/true);
    Tape tape;
    Tensor loss = f(tape, leaf);
    if (loss.numel() != 1) throw ContractError("grad_check: f must be scalar-valued");
    tape.backward(loss);
    std::vector<double> analytic(leaf.numel(), 0.0);
    if (leaf.has_grad()) {
        std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());
    }

    // Numeric gradient, tape-free.
    double worst = 0.0;
    Tensor probe = x.clone(false);
    for (size_t i = 0; i < probe.numel(); ++i) {
        const double orig = probe.data()[i];
        probe.data()[i] = orig + step;
        Tape tp;
        tp.set_grad_enabled(false);
        const double up = f(tp, probe).item();
        probe.data()[i] = orig - step;
        Tape tm;
        tm.set_grad_enabled(false);
        const double dn = f(tm, probe).item();
        probe.data()[i] = orig;
        const double numeric = (up - dn) / (2.0 * step);
        worst = std::max(worst, rel_err(analytic[i], numeric));
    }
    return worst;
}

double grad_check_params(const LossFn& loss_fn, const std::vector<Tensor>& params,
                         double step) {
    for (const Tensor& p : params) {
        if (!p.requires_grad()) throw ContractError("grad_check_params: leaf without grad");
        Tensor mp = p;
        mp.zero_grad();
    }
    {
        Tape tape;
        Tensor loss = loss_fn(tape);
        if (loss.numel() != 1) throw ContractError("grad_check_params: loss must be scalar");
        tape.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const Tensor& p : params) {
        std::vector<double> g(p.numel(), 0.0);
        if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), g.begin());
        analytic.push_back(std::move(g));
    }

    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        for (size_t i = 0; i < p.numel(); ++i) {
            const double orig = p.data()[i];
            p.data()[i] = orig + step;
            Tape tp;
            tp.set_grad_enabled(false);
            const double up = loss_fn(tp).item();
            p.data()[i] = orig - step;
            Tape tm;
            tm.set_grad_enabled(false);
            const double dn = loss_fn(tm).item();
            p.data()[i] = orig;
            const double numeric = (up - dn) / (2.0 * step);
            worst = std::max(worst, rel_err(analytic[pi][i], numeric));
        }
    }
    return worst;
}

}  // namespace adgen
