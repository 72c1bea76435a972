// SPDX-License-Identifier: Apache-2.0
#include "adgen/nn.hpp"

#include <cmath>

namespace adgen::nn {

Linear make_linear(ParamSet& ps, const std::string& name, size_t in, size_t out, Rng& rng,
                   double stddev, bool zero_init) {
    Linear l;
    l.w = ps.add(name + ".w", zero_init ? Tensor::zeros({in, out})
                                        : Tensor::randn({in, out}, rng, stddev));
    l.b = ps.add(name + ".b", Tensor::zeros({1, out}));
    return l;
}

Tensor linear(Tape& tape, const Linear& l, const Tensor& x) {
    return tape.add_rowvec(tape.matmul(x, l.w), l.b);
}

Tensor rmsnorm(Tape& tape, const Tensor& x, const Tensor& gain, double eps) {
    Tensor ms = tape.mean_cols(tape.mul(x, x));                 // [m]
    Tensor inv = tape.div(Tensor::full({x.rows()}, 1.0),
                          tape.sqrt(tape.add_scalar(ms, eps)));  // [m]
    return tape.mul_rowvec(tape.mul_colvec(x, inv), gain);
}

Tensor self_attention(Tape& tape, const Tensor& x, const Linear& wq, const Linear& wk,
                      const Linear& wv, const Linear& wo, size_t n_heads, bool causal) {
    const size_t d = x.cols();
    if (d % n_heads != 0) throw ShapeError("self_attention: d_model not divisible by heads");
    const size_t hd = d / n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

    Tensor q = linear(tape, wq, x);
    Tensor k = linear(tape, wk, x);
    Tensor v = linear(tape, wv, x);

    std::vector<Tensor> heads;
    heads.reserve(n_heads);
    for (size_t h = 0; h < n_heads; ++h) {
        Tensor qh = tape.slice_cols(q, h * hd, (h + 1) * hd);
        Tensor kh = tape.slice_cols(k, h * hd, (h + 1) * hd);
        Tensor vh = tape.slice_cols(v, h * hd, (h + 1) * hd);
        Tensor scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt);
        Tensor att = causal ? tape.causal_softmax(scores) : tape.softmax(scores);
        heads.push_back(tape.matmul(att, vh));
    }
    return linear(tape, wo, tape.concat_cols(heads));
}

EncoderLayer make_encoder_layer(ParamSet& ps, const std::string& prefix, size_t d_model,
                                size_t ffn_dim, Rng& rng, double stddev,
                                bool zero_residual_proj) {
    EncoderLayer l;
    l.ln1_gain = ps.add(prefix + ".ln1", Tensor::full({1, d_model}, 1.0));
    l.ln2_gain = ps.add(prefix + ".ln2", Tensor::full({1, d_model}, 1.0));
    l.wq = make_linear(ps, prefix + ".wq", d_model, d_model, rng, stddev);
    l.wk = make_linear(ps, prefix + ".wk", d_model, d_model, rng, stddev);
    l.wv = make_linear(ps, prefix + ".wv", d_model, d_model, rng, stddev);
    l.wo = make_linear(ps, prefix + ".wo", d_model, d_model, rng, stddev, zero_residual_proj);
    l.fc1 = make_linear(ps, prefix + ".fc1", d_model, ffn_dim, rng, stddev);
    l.fc2 = make_linear(ps, prefix + ".fc2", ffn_dim, d_model, rng, stddev, zero_residual_proj);
    return l;
}

Tensor encoder_layer(Tape& tape, const EncoderLayer& l, const Tensor& x, size_t n_heads,
                     bool causal) {
    Tensor h = tape.add(
        x, self_attention(tape, rmsnorm(tape, x, l.ln1_gain), l.wq, l.wk, l.wv, l.wo, n_heads,
                          causal));
    Tensor ff = linear(tape, l.fc2, tape.relu(linear(tape, l.fc1, rmsnorm(tape, h, l.ln2_gain))));
    return tape.add(h, ff);
}

void init_adam_state(const ParamSet& params, ParamSet& state) {
    for (const auto& [name, t] : params.items()) {
        state.add("adam.m." + name, Tensor::zeros(t.shape()));
        state.add("adam.v." + name, Tensor::zeros(t.shape()));
    }
}

void AdamW::step(ParamSet& params, ParamSet& state, long long t) const {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (const auto& [name, p] : params.items()) {
        Tensor pm = p;
        if (!pm.has_grad()) grad_buffer(pm);
        Tensor m = state.at("adam.m." + name);
        Tensor v = state.at("adam.v." + name);
        auto pv = pm.data();
        auto gv = pm.grad();
        auto mv = m.data();
        auto vv = v.data();
        for (size_t i = 0; i < pv.size(); ++i) {
            const double g = gv[i];
            mv[i] = beta1 * mv[i] + (1.0 - beta1) * g;
            vv[i] = beta2 * vv[i] + (1.0 - beta2) * g * g;
            const double mhat = mv[i] / bc1;
            const double vhat = vv[i] / bc2;
            pv[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * pv[i]);
        }
    }
}

}  // namespace adgen::nn
