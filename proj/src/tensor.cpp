// SPDX-License-Identifier: Apache-2.0
#include "adgen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adgen/kernels.hpp"

namespace adgen {

namespace {

size_t shape_numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) {
        if (d == 0) throw ShapeError("zero-sized dimension");
        n *= d;
    }
    return n;
}

#ifndef NDEBUG
void debug_check_finite(const Tensor& t, const char* op) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by op '") + op + "'");
        }
    }
}
#define ADGEN_CHECK_FINITE(t, op) debug_check_finite((t), (op))
#else
#define ADGEN_CHECK_FINITE(t, op) ((void)0)
#endif

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
    }
}

}  // namespace

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
    auto d = std::make_shared<TensorData>();
    size_t n = shape_numel(shape);
    d->shape = std::move(shape);
    d->value.assign(n, 0.0);
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
}

Tensor Tensor::uninit(std::vector<size_t> shape) {
    auto d = std::make_shared<TensorData>();
    size_t n = shape_numel(shape);
    d->shape = std::move(shape);
    d->value.resize(n);
    return Tensor(std::move(d));
}

Tensor Tensor::full(std::vector<size_t> shape, double v, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data().begin(), t.data().end(), v);
    return t;
}

Tensor Tensor::from(std::vector<double> data, std::vector<size_t> shape, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("from: data size does not match shape");
    }
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->value.assign(data.begin(), data.end());
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({v}, {1}, requires_grad);
}

Tensor Tensor::randn(std::vector<size_t> shape, Rng& rng, double stddev, bool requires_grad) {
    Tensor t = uninit(std::move(shape));
    t.set_requires_grad(requires_grad);
    for (double& v : t.data()) v = rng.normal() * stddev;
    return t;
}

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item(): tensor is not scalar, shape " + shape_str());
    return d_->value[0];
}

Tensor Tensor::clone(bool requires_grad) const {
    auto d = std::make_shared<TensorData>();
    d->shape = d_->shape;
    d->value = d_->value;
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < d_->shape.size(); ++i) os << (i ? "x" : "") << d_->shape[i];
    os << "]";
    return os.str();
}

std::span<double> grad_buffer(const Tensor& t) {
    TensorData* d = t.raw();
    if (d->grad.size() != d->value.size()) d->grad.assign(d->value.size(), 0.0);
    return d->grad;
}

void accumulate_grad(const Tensor& t, std::span<const double> g) {
    auto buf = grad_buffer(t);
    for (size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

void Tape::reset() {
    nodes_.clear();
    consumed_ = false;
}

Tensor Tape::make_out(std::vector<size_t> shape, bool needs_grad, bool zeroed) {
    Tensor out = zeroed ? Tensor::zeros(std::move(shape)) : Tensor::uninit(std::move(shape));
    out.set_requires_grad(needs_grad);
    return out;
}

void Tape::record(bool needs_grad, std::function<void()> fn) {
    if (needs_grad) nodes_.push_back(Node{std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + loss.shape_str());
    }
    if (!loss.requires_grad()) {
        throw ContractError("backward: loss is not attached to the tape");
    }
    if (consumed_) {
        throw ContractError("backward: tape already consumed; call reset() first");
    }
    consumed_ = true;
    grad_buffer(loss)[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward_fn();
}

// ---------------------------------------------------------------------------
// elementwise

namespace {
template <class Fwd>
Tensor unary_op(Tape& tape, const Tensor& a, const char* name, Fwd fwd,
                std::function<void(const Tensor&, const Tensor&)> bwd, bool track) {
    Tensor out = Tensor::zeros(a.shape());
    const auto av = a.data();
    auto ov = out.data();
    for (size_t i = 0; i < av.size(); ++i) ov[i] = fwd(av[i]);
    out.set_requires_grad(track);
    ADGEN_CHECK_FINITE(out, name);
    return out;
}
}  // namespace

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    bool req = track(a) || track(b);
    Tensor out = make_out(a.shape(), req);
    const auto av = a.data(), bv = b.data();
    auto ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    ADGEN_CHECK_FINITE(out, "add");
    record(req, [a, b, out, this] {
        auto g = grad_buffer(out);
        if (track(a)) accumulate_grad(a, g);
        if (track(b)) accumulate_grad(b, g);
    });
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    bool req = track(a) || track(b);
    Tensor out = make_out(a.shape(), req);
    const auto av = a.data(), bv = b.data();
    auto ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
    ADGEN_CHECK_FINITE(out, "sub");
    record(req, [a, b, out, this] {
        auto g = grad_buffer(out);
        if (track(a)) accumulate_grad(a, g);
        if (track(b)) {
            auto gb = grad_buffer(b);
            for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
        }
    });
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    bool req = track(a) || track(b);
    Tensor out = make_out(a.shape(), req);
    const auto av = a.data(), bv = b.data();
    auto ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    ADGEN_CHECK_FINITE(out, "mul");
    record(req, [a, b, out, this] {
        auto g = grad_buffer(out);
        if (track(a)) {
            auto ga = grad_buffer(a);
            const auto bv2 = b.data();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv2[i];
        }
        if (track(b)) {
            auto gb = grad_buffer(b);
            const auto av2 = a.data();
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av2[i];
        }
    });
    return out;
}

Tensor Tape::div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    bool req = track(a) || track(b);
    Tensor out = make_out(a.shape(), req);
    const auto av = a.data(), bv = b.data();
    auto ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] / bv[i];
    ADGEN_CHECK_FINITE(out, "div");
    record(req, [a, b, out, this] {
        auto g = grad_buffer(out);
        const auto av2 = a.data(), bv2 = b.data(), cv = out.data();
        if (track(a)) {
            auto ga = grad_buffer(a);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] / bv2[i];
        }
        if (track(b)) {
            auto gb = grad_buffer(b);
            for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i] * cv[i] / bv2[i];
        }
        (void)av2;
    });
    return out;
}

Tensor Tape::relu(const Tensor& a) {
    bool req = track(a);
    Tensor out = unary_op(*this, a, "relu", [](double x) { return x > 0 ? x : 0.0; }, {}, req);
    record(req, [a, out, this] {
        auto g = grad_buffer(out);
        auto ga = grad_buffer(a);
        const auto av = a.data();
        for (size_t i = 0; i < ga.size(); ++i)
            if (av[i] > 0) ga[i] += g[i];
    });
    return out;
}

Tensor Tape::exp(const Tensor& a) {
    bool req = track(a);
    Tensor out = unary_op(*this, a, "exp", [](double x) { return std::exp(x); }, {}, req);
    record(req, [a, out] {
        auto g = grad_buffer(out);
        auto ga = grad_buffer(a);
        const auto ov = out.data();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * ov[i];
    });
    return out;
}

Tensor Tape::log(const Tensor& a) {
    bool req = track(a);
    Tensor out = unary_op(*this, a, "log", [](double x) { return std::log(x); }, {}, req);
    record(req, [a, out] {
        auto g = grad_buffer(out);
        auto ga = grad_buffer(a);
        const auto av = a.data();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] / av[i];
    });
    return out;
}

Tensor Tape::sqrt(const Tensor& a) {
    bool req = track(a);
    Tensor out = unary_op(*this, a, "sqrt", [](double x) { return std::sqrt(x); }, {}, req);
    record(req, [a, out] {
        auto g = grad_buffer(out);
        auto ga = grad_buffer(a);
        const auto ov = out.data();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * 0.5 / ov[i];
    });
    return out;
}

Tensor Tape::neg(const Tensor& a) { return scale(a, -1.0); }

Tensor Tape::scale(const Tensor& a, double k) {
    bool req = track(a);
    Tensor out = unary_op(*this, a, "scale", [k](double x) { return x * k; }, {}, req);
    record(req, [a, out, k] {
        auto g = grad_buffer(out);
        auto ga = grad_buffer(a);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * k;
    });
    return out;
}

Tensor Tape::add_scalar(const Tensor& a, double k) {
    bool req = track(a);
    Tensor out = unary_op(*this, a, "add_scalar", [k](double x) { return x + k; }, {}, req);
    record(req, [a, out] { accumulate_grad(a, grad_buffer(out)); });
    return out;
}

// ---------------------------------------------------------------------------
// broadcast

Tensor Tape::add_rowvec(const Tensor& x, const Tensor& b) {
    if (x.ndim() != 2 || b.cols() != x.cols() || b.rows() != 1) {
        throw ShapeError("add_rowvec: " + x.shape_str() + " + " + b.shape_str());
    }
    bool req = track(x) || track(b);
    Tensor out = make_out(x.shape(), req);
    const size_t m = x.rows(), n = x.cols();
    const auto xv = x.data(), bv = b.data();
    auto ov = out.data();
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) ov[i * n + j] = xv[i * n + j] + bv[j];
    ADGEN_CHECK_FINITE(out, "add_rowvec");
    record(req, [x, b, out, m, n, this] {
        auto g = grad_buffer(out);
        if (track(x)) accumulate_grad(x, g);
        if (track(b)) {
            auto gb = grad_buffer(b);
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
    });
    return out;
}

Tensor Tape::mul_rowvec(const Tensor& x, const Tensor& b) {
    if (x.ndim() != 2 || b.cols() != x.cols() || b.rows() != 1) {
        throw ShapeError("mul_rowvec: " + x.shape_str() + " * " + b.shape_str());
    }
    bool req = track(x) || track(b);
    Tensor out = make_out(x.shape(), req);
    const size_t m = x.rows(), n = x.cols();
    const auto xv = x.data(), bv = b.data();
    auto ov = out.data();
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) ov[i * n + j] = xv[i * n + j] * bv[j];
    ADGEN_CHECK_FINITE(out, "mul_rowvec");
    record(req, [x, b, out, m, n, this] {
        auto g = grad_buffer(out);
        if (track(x)) {
            auto gx = grad_buffer(x);
            const auto bv2 = b.data();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) gx[i * n + j] += g[i * n + j] * bv2[j];
        }
        if (track(b)) {
            auto gb = grad_buffer(b);
            const auto xv2 = x.data();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) gb[j] += g[i * n + j] * xv2[i * n + j];
        }
    });
    return out;
}

Tensor Tape::add_colvec(const Tensor& x, const Tensor& v) {
    if (x.ndim() != 2 || v.numel() != x.rows()) {
        throw ShapeError("add_colvec: " + x.shape_str() + " + " + v.shape_str());
    }
    bool req = track(x) || track(v);
    Tensor out = make_out(x.shape(), req);
    const size_t m = x.rows(), n = x.cols();
    const auto xv = x.data(), vv = v.data();
    auto ov = out.data();
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) ov[i * n + j] = xv[i * n + j] + vv[i];
    ADGEN_CHECK_FINITE(out, "add_colvec");
    record(req, [x, v, out, m, n, this] {
        auto g = grad_buffer(out);
        if (track(x)) accumulate_grad(x, g);
        if (track(v)) {
            auto gv = grad_buffer(v);
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) gv[i] += g[i * n + j];
        }
    });
    return out;
}

Tensor Tape::mul_colvec(const Tensor& x, const Tensor& v) {
    if (x.ndim() != 2 || v.numel() != x.rows()) {
        throw ShapeError("mul_colvec: " + x.shape_str() + " * " + v.shape_str());
    }
    bool req = track(x) || track(v);
    Tensor out = make_out(x.shape(), req);
    const size_t m = x.rows(), n = x.cols();
    const auto xv = x.data(), vv = v.data();
    auto ov = out.data();
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) ov[i * n + j] = xv[i * n + j] * vv[i];
    ADGEN_CHECK_FINITE(out, "mul_colvec");
    record(req, [x, v, out, m, n, this] {
        auto g = grad_buffer(out);
        if (track(x)) {
            auto gx = grad_buffer(x);
            const auto vv2 = v.data();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) gx[i * n + j] += g[i * n + j] * vv2[i];
        }
        if (track(v)) {
            auto gv = grad_buffer(v);
            const auto xv2 = x.data();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) gv[i] += g[i * n + j] * xv2[i * n + j];
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// reductions

Tensor Tape::sum_all(const Tensor& x) {
    bool req = track(x);
    Tensor out = make_out({1}, req);
    double s = 0;
    for (double v : x.data()) s += v;
    out.data()[0] = s;
    ADGEN_CHECK_FINITE(out, "sum_all");
    record(req, [x, out] {
        double g = grad_buffer(out)[0];
        auto gx = grad_buffer(x);
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
    return out;
}

Tensor Tape::mean_all(const Tensor& x) {
    bool req = track(x);
    Tensor out = make_out({1}, req);
    double s = 0;
    for (double v : x.data()) s += v;
    const double inv = 1.0 / static_cast<double>(x.numel());
    out.data()[0] = s * inv;
    ADGEN_CHECK_FINITE(out, "mean_all");
    record(req, [x, out, inv] {
        double g = grad_buffer(out)[0] * inv;
        auto gx = grad_buffer(x);
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
    return out;
}

Tensor Tape::mean_rows(const Tensor& x) {
    if (x.ndim() != 2) throw ShapeError("mean_rows: need 2-D, got " + x.shape_str());
    bool req = track(x);
    const size_t m = x.rows(), n = x.cols();
    Tensor out = make_out({1, n}, req, /*zeroed=*/true);
    const auto xv = x.data();
    auto ov = out.data();
    const double inv = 1.0 / static_cast<double>(m);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) ov[j] += xv[i * n + j];
    for (size_t j = 0; j < n; ++j) ov[j] *= inv;
    ADGEN_CHECK_FINITE(out, "mean_rows");
    record(req, [x, out, m, n, inv] {
        auto g = grad_buffer(out);
        auto gx = grad_buffer(x);
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) gx[i * n + j] += g[j] * inv;
    });
    return out;
}

Tensor Tape::sum_cols(const Tensor& x) {
    if (x.ndim() != 2) throw ShapeError("sum_cols: need 2-D, got " + x.shape_str());
    bool req = track(x);
    const size_t m = x.rows(), n = x.cols();
    Tensor out = make_out({m}, req);
    const auto xv = x.data();
    auto ov = out.data();
    for (size_t i = 0; i < m; ++i) {
        double s = 0;
        for (size_t j = 0; j < n; ++j) s += xv[i * n + j];
        ov[i] = s;
    }
    ADGEN_CHECK_FINITE(out, "sum_cols");
    record(req, [x, out, m, n] {
        auto g = grad_buffer(out);
        auto gx = grad_buffer(x);
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) gx[i * n + j] += g[i];
    });
    return out;
}

Tensor Tape::mean_cols(const Tensor& x) {
    Tensor s = sum_cols(x);
    return scale(s, 1.0 / static_cast<double>(x.cols()));
}

// ---------------------------------------------------------------------------
// structure

Tensor Tape::reshape(const Tensor& x, std::vector<size_t> shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    if (n != x.numel() || shape.empty()) {
        throw ShapeError("reshape: cannot view " + x.shape_str() + " with the requested shape");
    }
    bool req = track(x);
    Tensor out = make_out(std::move(shape), req);
    std::copy(x.data().begin(), x.data().end(), out.data().begin());
    record(req, [x, out] { accumulate_grad(x, grad_buffer(out)); });
    return out;
}

Tensor Tape::gather_rows(const Tensor& table, const std::vector<int>& ids) {
    if (table.ndim() != 2) throw ShapeError("gather_rows: table must be 2-D");
    const size_t v = table.rows(), d = table.cols();
    for (int id : ids) {
        if (id < 0 || static_cast<size_t>(id) >= v) {
            throw IndexError("gather_rows: id " + std::to_string(id) + " out of range [0," +
                             std::to_string(v) + ")");
        }
    }
    bool req = track(table);
    Tensor out = make_out({ids.size(), d}, req);
    const auto tv = table.data();
    auto ov = out.data();
    for (size_t t = 0; t < ids.size(); ++t) {
        std::copy_n(tv.data() + static_cast<size_t>(ids[t]) * d, d, ov.data() + t * d);
    }
    record(req, [table, out, ids, d] {
        auto g = grad_buffer(out);
        auto gt = grad_buffer(table);
        for (size_t t = 0; t < ids.size(); ++t) {
            double* dst = gt.data() + static_cast<size_t>(ids[t]) * d;
            const double* src = g.data() + t * d;
            for (size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
    return out;
}

Tensor Tape::overwrite_rows(const Tensor& x, const std::vector<size_t>& positions,
                            const Tensor& replacements) {
    if (x.ndim() != 2 || replacements.ndim() != 2 || replacements.cols() != x.cols() ||
        replacements.rows() != positions.size()) {
        throw ShapeError("overwrite_rows: " + x.shape_str() + " with " +
                         replacements.shape_str());
    }
    for (size_t p : positions) {
        if (p >= x.rows()) throw IndexError("overwrite_rows: position out of range");
    }
    bool req = track(x) || track(replacements);
    Tensor out = x.clone();
    out.set_requires_grad(req);
    const size_t n = x.cols();
    const auto rv = replacements.data();
    auto ov = out.data();
    for (size_t p = 0; p < positions.size(); ++p) {
        std::copy_n(rv.data() + p * n, n, ov.data() + positions[p] * n);
    }
    record(req, [x, replacements, out, positions, n, this] {
        auto g = grad_buffer(out);
        if (track(x)) {
            auto gx = grad_buffer(x);
            std::vector<bool> overwritten(x.rows(), false);
            for (size_t p : positions) overwritten[p] = true;
            for (size_t i = 0; i < x.rows(); ++i) {
                if (overwritten[i]) continue;
                for (size_t j = 0; j < n; ++j) gx[i * n + j] += g[i * n + j];
            }
        }
        if (track(replacements)) {
            auto gr = grad_buffer(replacements);
            for (size_t p = 0; p < positions.size(); ++p) {
                for (size_t j = 0; j < n; ++j) gr[p * n + j] += g[positions[p] * n + j];
            }
        }
    });
    return out;
}

Tensor Tape::concat_rows(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols()) {
        throw ShapeError("concat_rows: " + a.shape_str() + " | " + b.shape_str());
    }
    bool req = track(a) || track(b);
    const size_t n = a.cols(), ra = a.rows(), rb = b.rows();
    Tensor out = make_out({ra + rb, n}, req);
    auto ov = out.data();
    std::copy_n(a.data().data(), ra * n, ov.data());
    std::copy_n(b.data().data(), rb * n, ov.data() + ra * n);
    record(req, [a, b, out, ra, rb, n, this] {
        auto g = grad_buffer(out);
        if (track(a)) accumulate_grad(a, g.subspan(0, ra * n));
        if (track(b)) accumulate_grad(b, g.subspan(ra * n, rb * n));
    });
    return out;
}

Tensor Tape::slice_rows(const Tensor& x, size_t r0, size_t r1) {
    if (x.ndim() != 2 || r0 >= r1 || r1 > x.rows()) {
        throw ShapeError("slice_rows: bad range [" + std::to_string(r0) + "," +
                         std::to_string(r1) + ") for " + x.shape_str());
    }
    bool req = track(x);
    const size_t n = x.cols(), m = r1 - r0;
    Tensor out = make_out({m, n}, req);
    std::copy_n(x.data().data() + r0 * n, m * n, out.data().data());
    record(req, [x, out, r0, m, n] {
        auto g = grad_buffer(out);
        auto gx = grad_buffer(x);
        for (size_t i = 0; i < m * n; ++i) gx[r0 * n + i] += g[i];
    });
    return out;
}

Tensor Tape::slice_cols(const Tensor& x, size_t c0, size_t c1) {
    if (x.ndim() != 2 || c0 >= c1 || c1 > x.cols()) {
        throw ShapeError("slice_cols: bad range for " + x.shape_str());
    }
    bool req = track(x);
    const size_t m = x.rows(), n = x.cols(), w = c1 - c0;
    Tensor out = make_out({m, w}, req);
    const auto xv = x.data();
    auto ov = out.data();
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < w; ++j) ov[i * w + j] = xv[i * n + c0 + j];
    record(req, [x, out, c0, m, n, w] {
        auto g = grad_buffer(out);
        auto gx = grad_buffer(x);
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < w; ++j) gx[i * n + c0 + j] += g[i * w + j];
    });
    return out;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty part list");
    const size_t m = parts[0].rows();
    size_t n = 0;
    bool req = false;
    for (const Tensor& p : parts) {
        if (p.ndim() != 2 || p.rows() != m) throw ShapeError("concat_cols: row mismatch");
        n += p.cols();
        req = req || track(p);
    }
    Tensor out = make_out({m, n}, req);
    auto ov = out.data();
    size_t off = 0;
    for (const Tensor& p : parts) {
        const size_t w = p.cols();
        const auto pv = p.data();
        for (size_t i = 0; i < m; ++i)
            std::copy_n(pv.data() + i * w, w, ov.data() + i * n + off);
        off += w;
    }
    record(req, [parts, out, m, n, this] {
        auto g = grad_buffer(out);
        size_t c0 = 0;
        for (const Tensor& p : parts) {
            const size_t w = p.cols();
            if (track(p)) {
                auto gp = grad_buffer(p);
                for (size_t i = 0; i < m; ++i)
                    for (size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * n + c0 + j];
            }
            c0 += w;
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// linear algebra

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() + " * " +
                         b.shape_str());
    }
    bool req = track(a) || track(b);
    const size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make_out({m, n}, req);
    kernels::matmul_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    ADGEN_CHECK_FINITE(out, "matmul");
    record(req, [a, b, out, m, k, n, this] {
        auto g = grad_buffer(out);
        if (track(a)) {
            kernels::matmul_nt(g.data(), b.data().data(), grad_buffer(a).data(), m, n, k, true);
        }
        if (track(b)) {
            kernels::matmul_tn(a.data().data(), g.data(), grad_buffer(b).data(), k, m, n, true);
        }
    });
    return out;
}

Tensor Tape::matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: inner dimensions differ, " + a.shape_str() + " * " +
                         b.shape_str() + "^T");
    }
    bool req = track(a) || track(b);
    const size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor out = make_out({m, n}, req);
    kernels::matmul_nt(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    ADGEN_CHECK_FINITE(out, "matmul_nt");
    record(req, [a, b, out, m, k, n, this] {
        auto g = grad_buffer(out);
        if (track(a)) {
            kernels::matmul_nn(g.data(), b.data().data(), grad_buffer(a).data(), m, n, k, true);
        }
        if (track(b)) {
            kernels::matmul_tn(g.data(), a.data().data(), grad_buffer(b).data(), n, m, k, true);
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// fused model ops

Tensor Tape::softmax(const Tensor& x, int axis) {
    const int last = static_cast<int>(x.ndim()) - 1;
    if (axis != -1 && axis != last) {
        throw ParamError("softmax: only the last axis is supported");
    }
    bool req = track(x);
    const size_t rows = x.ndim() == 2 ? x.rows() : 1;
    const size_t cols = x.ndim() == 2 ? x.cols() : x.numel();
    Tensor out = make_out(x.shape(), req);
    kernels::softmax_rows(x.data().data(), out.data().data(), rows, cols);
    ADGEN_CHECK_FINITE(out, "softmax");
    record(req, [x, out, rows, cols] {
        auto g = grad_buffer(out);
        auto gx = grad_buffer(x);
        const auto y = out.data();
        for (size_t r = 0; r < rows; ++r) {
            const double* yr = y.data() + r * cols;
            const double* gr = g.data() + r * cols;
            double dot = 0;
            for (size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
            double* gxr = gx.data() + r * cols;
            for (size_t j = 0; j < cols; ++j) gxr[j] += (gr[j] - dot) * yr[j];
        }
    });
    return out;
}

Tensor Tape::causal_softmax(const Tensor& scores) {
    if (scores.ndim() != 2 || scores.rows() != scores.cols()) {
        throw ShapeError("causal_softmax: need a square score matrix, got " +
                         scores.shape_str());
    }
    bool req = track(scores);
    const size_t t = scores.rows();
    Tensor out = make_out(scores.shape(), req);
    const auto xv = scores.data();
    auto ov = out.data();
    for (size_t r = 0; r < t; ++r) {
        const double* xr = xv.data() + r * t;
        double* yr = ov.data() + r * t;
        double mx = xr[0];
        for (size_t j = 1; j <= r; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (size_t j = 0; j <= r; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const double inv = 1.0 / sum;
        for (size_t j = 0; j <= r; ++j) yr[j] *= inv;
        for (size_t j = r + 1; j < t; ++j) yr[j] = 0.0;
    }
    ADGEN_CHECK_FINITE(out, "causal_softmax");
    // Masked outputs are exactly zero, so the generic softmax backward
    // already sends them zero gradient.
    record(req, [scores, out, t] {
        auto g = grad_buffer(out);
        auto gx = grad_buffer(scores);
        const auto y = out.data();
        for (size_t r = 0; r < t; ++r) {
            const double* yr = y.data() + r * t;
            const double* gr = g.data() + r * t;
            double dot = 0;
            for (size_t j = 0; j <= r; ++j) dot += gr[j] * yr[j];
            double* gxr = gx.data() + r * t;
            for (size_t j = 0; j <= r; ++j) gxr[j] += (gr[j] - dot) * yr[j];
        }
    });
    return out;
}

Tensor Tape::cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
    if (logits.ndim() != 2) throw ShapeError("cross_entropy: logits must be 2-D");
    const size_t t = logits.rows(), v = logits.cols();
    if (targets.size() != t) {
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(t) + " rows");
    }
    for (int id : targets) {
        if (id < 0 || static_cast<size_t>(id) >= v) {
            throw IndexError("cross_entropy: target id " + std::to_string(id) +
                             " out of range [0," + std::to_string(v) + ")");
        }
    }
    bool req = track(logits);
    // Cache the row softmax for the backward rule.
    Tensor probs = Tensor::uninit({t, v});
    kernels::softmax_rows(logits.data().data(), probs.data().data(), t, v);
    double loss = 0;
    for (size_t r = 0; r < t; ++r) {
        loss -= std::log(probs.at(r, static_cast<size_t>(targets[r])));
    }
    Tensor out = make_out({1}, req);
    out.data()[0] = loss / static_cast<double>(t);
    ADGEN_CHECK_FINITE(out, "cross_entropy");
    record(req, [logits, probs, out, targets, t, v] {
        const double g = grad_buffer(out)[0] / static_cast<double>(t);
        auto gl = grad_buffer(logits);
        const auto pv = probs.data();
        for (size_t r = 0; r < t; ++r) {
            const double* pr = pv.data() + r * v;
            double* glr = gl.data() + r * v;
            for (size_t j = 0; j < v; ++j) glr[j] += g * pr[j];
            glr[static_cast<size_t>(targets[r])] -= g;
        }
    });
    return out;
}

Tensor Tape::gumbel_softmax(const Tensor& scores, double temperature, Rng& rng, bool hard) {
    if (temperature <= 0) {
        throw ParamError("gumbel_softmax: temperature must be > 0, got " +
                         std::to_string(temperature));
    }
    if (scores.ndim() != 1) throw ShapeError("gumbel_softmax: scores must be 1-D");
    const size_t n = scores.numel();
    bool req = track(scores);

    std::vector<double> perturbed(n);
    const auto sv = scores.data();
    for (size_t i = 0; i < n; ++i) perturbed[i] = (sv[i] + rng.gumbel()) / temperature;
    Tensor soft = Tensor::uninit({n});
    kernels::softmax_rows(perturbed.data(), soft.data().data(), 1, n);

    Tensor out = make_out({n}, req, /*zeroed=*/true);
    if (hard) {
        size_t argmax = 0;
        for (size_t i = 1; i < n; ++i)
            if (perturbed[i] > perturbed[argmax]) argmax = i;
        out.data()[argmax] = 1.0;
    } else {
        std::copy_n(soft.data().data(), n, out.data().data());
    }
    ADGEN_CHECK_FINITE(out, "gumbel_softmax");
    // Straight-through: the hard forward uses the soft distribution's
    // gradient w.r.t. the scores.
    record(req, [scores, soft, out, temperature, n] {
        auto g = grad_buffer(out);
        auto gs = grad_buffer(scores);
        const auto y = soft.data();
        double dot = 0;
        for (size_t j = 0; j < n; ++j) dot += g[j] * y[j];
        for (size_t j = 0; j < n; ++j) gs[j] += (g[j] - dot) * y[j] / temperature;
    });
    return out;
}

Tensor Tape::gumbel_topk_mask(const Tensor& scores, size_t k, double temperature, Rng& rng) {
    if (temperature <= 0) {
        throw ParamError("gumbel_topk_mask: temperature must be > 0, got " +
                         std::to_string(temperature));
    }
    if (scores.ndim() != 1) throw ShapeError("gumbel_topk_mask: scores must be 1-D");
    const size_t n = scores.numel();
    if (k < 1 || k > n) {
        throw ParamError("gumbel_topk_mask: k must be in [1," + std::to_string(n) + "], got " +
                         std::to_string(k));
    }
    bool req = track(scores);

    std::vector<double> perturbed(n);
    const auto sv = scores.data();
    for (size_t i = 0; i < n; ++i) perturbed[i] = sv[i] + rng.gumbel();

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](size_t a, size_t b) { return perturbed[a] > perturbed[b]; });

    Tensor out = make_out({n}, req, /*zeroed=*/true);
    for (size_t i = 0; i < k; ++i) out.data()[order[i]] = 1.0;

    std::vector<double> scaled(n);
    for (size_t i = 0; i < n; ++i) scaled[i] = perturbed[i] / temperature;
    Tensor soft = Tensor::uninit({n});
    kernels::softmax_rows(scaled.data(), soft.data().data(), 1, n);

    record(req, [scores, soft, out, temperature, n] {
        auto g = grad_buffer(out);
        auto gs = grad_buffer(scores);
        const auto y = soft.data();
        double dot = 0;
        for (size_t j = 0; j < n; ++j) dot += g[j] * y[j];
        for (size_t j = 0; j < n; ++j) gs[j] += (g[j] - dot) * y[j] / temperature;
    });
    return out;
}

}  // namespace adgen
