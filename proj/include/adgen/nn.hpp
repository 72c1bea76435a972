// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "adgen/tensor.hpp"

namespace adgen::nn {

// Insertion-ordered named parameter registry. The order fixes the optimizer
// iteration order and the checkpoint manifest order.
class ParamSet {
  public:
    Tensor add(const std::string& name, Tensor t) {
        if (index_.count(name)) throw ContractError("ParamSet: duplicate name " + name);
        t.set_requires_grad(true);
        index_[name] = items_.size();
        items_.emplace_back(name, t);
        return t;
    }
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    const Tensor& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("ParamSet: unknown name " + name);
        return items_[it->second].second;
    }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    size_t size() const { return items_.size(); }
    size_t numel() const {
        size_t n = 0;
        for (const auto& [_, t] : items_) n += t.numel();
        return n;
    }
    std::vector<Tensor> tensors() const {
        std::vector<Tensor> out;
        out.reserve(items_.size());
        for (const auto& [_, t] : items_) out.push_back(t);
        return out;
    }
    void zero_grad() {
        for (auto& [_, t] : items_) t.zero_grad();
    }

  private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, size_t> index_;
};

struct Linear {
    Tensor w;  // [in, out]
    Tensor b;  // [1, out]
};

Linear make_linear(ParamSet& ps, const std::string& name, size_t in, size_t out, Rng& rng,
                   double stddev, bool zero_init = false);
Tensor linear(Tape& tape, const Linear& l, const Tensor& x);

// x / sqrt(mean(x^2) + eps) * gain, row-wise. gain is a [1,d] parameter.
Tensor rmsnorm(Tape& tape, const Tensor& x, const Tensor& gain, double eps = 1e-5);

// Multi-head scaled dot-product self-attention over a [T,d] sequence
// (composed from primitive ops so every piece is covered by grad checks).
Tensor self_attention(Tape& tape, const Tensor& x, const Linear& wq, const Linear& wk,
                      const Linear& wv, const Linear& wo, size_t n_heads, bool causal);

// Pre-norm transformer block: x + attn(norm(x)), then x + ffn(norm(x)).
struct EncoderLayer {
    Tensor ln1_gain, ln2_gain;
    Linear wq, wk, wv, wo;
    Linear fc1, fc2;
};

EncoderLayer make_encoder_layer(ParamSet& ps, const std::string& prefix, size_t d_model,
                                size_t ffn_dim, Rng& rng, double stddev,
                                bool zero_residual_proj = false);
Tensor encoder_layer(Tape& tape, const EncoderLayer& l, const Tensor& x, size_t n_heads,
                     bool causal);

// AdamW with decoupled weight decay. State tensors are registered in `state`
// under "adam.m.<name>" / "adam.v.<name>" so they ride along in checkpoints.
struct AdamW {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    void step(ParamSet& params, ParamSet& state, long long t) const;
};

// Allocates zeroed AdamW moment buffers for every parameter.
void init_adam_state(const ParamSet& params, ParamSet& state);

}  // namespace adgen::nn
