// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "adgen/common.hpp"
#include "adgen/rng.hpp"

namespace adgen {

// Dense 64-bit float tensor, row-major, 1-D or 2-D. Tensors are cheap
// handles onto shared storage; the Tape records tensor-level operations
// with their backward rules.

// Allocator that skips value-initialization: op outputs that are fully
// overwritten don't pay for a zero fill.
template <class T>
struct UninitAlloc : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = UninitAlloc<U>;
    };
    template <class U>
    void construct(U* p) noexcept {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

using Buffer = std::vector<double, UninitAlloc<double>>;

struct TensorData {
    std::vector<size_t> shape;
    Buffer value;
    Buffer grad;  // lazily allocated, same size as value
    bool requires_grad = false;
};

class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}

    static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
    static Tensor uninit(std::vector<size_t> shape);
    static Tensor full(std::vector<size_t> shape, double v, bool requires_grad = false);
    static Tensor from(std::vector<double> data, std::vector<size_t> shape,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor randn(std::vector<size_t> shape, Rng& rng, double stddev,
                        bool requires_grad = false);

    bool defined() const { return static_cast<bool>(d_); }
    const std::vector<size_t>& shape() const { return d_->shape; }
    size_t ndim() const { return d_->shape.size(); }
    size_t numel() const { return d_->value.size(); }
    // Row/column view of the underlying buffer: 1-D tensors are a single row.
    size_t rows() const { return ndim() == 2 ? d_->shape[0] : 1; }
    size_t cols() const { return ndim() == 2 ? d_->shape[1] : (ndim() == 1 ? d_->shape[0] : 1); }

    std::span<const double> data() const { return d_->value; }
    std::span<double> data() { return d_->value; }
    std::span<const double> grad() const { return d_->grad; }
    bool has_grad() const { return !d_->grad.empty(); }
    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool b) { d_->requires_grad = b; }
    void zero_grad() { std::fill(d_->grad.begin(), d_->grad.end(), 0.0); }

    double item() const;
    double at(size_t i) const { return d_->value[i]; }
    double at(size_t i, size_t j) const { return d_->value[i * cols() + j]; }
    double& at(size_t i) { return d_->value[i]; }
    double& at(size_t i, size_t j) { return d_->value[i * cols() + j]; }

    Tensor clone(bool requires_grad = false) const;
    std::string shape_str() const;

    TensorData* raw() const { return d_.get(); }
    std::shared_ptr<TensorData> ptr() const { return d_; }

  private:
    std::shared_ptr<TensorData> d_;
};

// Records one tensor op per node, in execution (topological) order. A tape
// and its tensors belong to a single thread; independent tapes are fully
// isolated. backward() may run once per tape; reset() clears it for reuse.
class Tape {
  public:
    bool grad_enabled() const { return grad_enabled_; }
    void set_grad_enabled(bool b) { grad_enabled_ = b; }
    size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }
    void reset();

    void backward(const Tensor& loss);

    // ---- elementwise, same shape ----
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor div(const Tensor& a, const Tensor& b);
    Tensor relu(const Tensor& a);
    Tensor exp(const Tensor& a);
    Tensor log(const Tensor& a);
    Tensor sqrt(const Tensor& a);
    Tensor neg(const Tensor& a);
    Tensor scale(const Tensor& a, double k);
    Tensor add_scalar(const Tensor& a, double k);

    // ---- broadcast ----
    Tensor add_rowvec(const Tensor& x, const Tensor& b);   // [m,n] + [n]
    Tensor mul_rowvec(const Tensor& x, const Tensor& b);   // [m,n] * [n]
    Tensor add_colvec(const Tensor& x, const Tensor& v);   // [m,n] + [m]
    Tensor mul_colvec(const Tensor& x, const Tensor& v);   // [m,n] * [m]

    // ---- reductions ----
    Tensor sum_all(const Tensor& x);
    Tensor mean_all(const Tensor& x);
    Tensor mean_rows(const Tensor& x);  // [m,n] -> [1,n]
    Tensor sum_cols(const Tensor& x);   // [m,n] -> [m]
    Tensor mean_cols(const Tensor& x);  // [m,n] -> [m]

    // ---- structure ----
    Tensor reshape(const Tensor& x, std::vector<size_t> shape);  // same numel
    Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);
    Tensor overwrite_rows(const Tensor& x, const std::vector<size_t>& positions,
                          const Tensor& replacements);
    Tensor concat_rows(const Tensor& a, const Tensor& b);
    Tensor slice_rows(const Tensor& x, size_t r0, size_t r1);
    Tensor slice_cols(const Tensor& x, size_t c0, size_t c1);
    Tensor concat_cols(const std::vector<Tensor>& parts);

    // ---- linear algebra ----
    Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]*[k,n]
    Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]*[n,k]^T

    // ---- model-facing fused ops ----
    // Row-wise softmax with max subtraction. axis must name the last axis.
    Tensor softmax(const Tensor& x, int axis = -1);
    // Softmax over columns j <= i of each row i of a square score matrix;
    // later columns are exactly zero (fused causal attention mask).
    Tensor causal_softmax(const Tensor& scores);
    // Mean over rows of -log softmax(logits)[target].
    Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);
    // softmax((scores + Gumbel noise) / temperature) over a 1-D score vector.
    // hard=true returns the one-hot argmax forward with the soft gradient
    // (straight-through).
    Tensor gumbel_softmax(const Tensor& scores, double temperature, Rng& rng,
                          bool hard = false);
    // K-hot mask at the top-K of (scores + Gumbel noise); backward follows
    // the soft perturbed distribution (straight-through top-K selection).
    // The kept set depends only on scores + noise, not on temperature.
    Tensor gumbel_topk_mask(const Tensor& scores, size_t k, double temperature, Rng& rng);

  private:
    struct Node {
        std::function<void()> backward_fn;
    };
    friend class TapeProbe;

    Tensor make_out(std::vector<size_t> shape, bool needs_grad, bool zeroed = false);
    void record(bool needs_grad, std::function<void()> fn);
    bool track(const Tensor& a) const { return grad_enabled_ && a.requires_grad(); }

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
    bool consumed_ = false;
};

// Accumulate g into t's grad buffer, allocating it on first use.
void accumulate_grad(const Tensor& t, std::span<const double> g);
std::span<double> grad_buffer(const Tensor& t);

}  // namespace adgen
