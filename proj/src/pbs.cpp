// SPDX-License-Identifier: Apache-2.0
#include "adgen/pbs.hpp"

#include <algorithm>
#include <cmath>

namespace adgen::eval {

void PbsConfig::validate() const {
    if (width == 0 || n_heads == 0 || width % n_heads != 0) {
        throw ConfigError("pbs.width must be positive and divisible by pbs.n_heads");
    }
    if (temperature <= 0) throw ConfigError("pbs.temperature must be > 0");
    if (batch < 2) throw ConfigError("pbs.batch must be >= 2");
    if (lr <= 0) throw ConfigError("pbs.lr must be > 0");
    if (dropout_patches >= tok::SyntheticImage::kPatches) {
        throw ConfigError("pbs.dropout_patches must be < 16");
    }
}

PbsEncoder init_pbs(nn::ParamSet& ps, const PbsConfig& cfg, Rng& rng, double stddev) {
    cfg.validate();
    PbsEncoder enc;
    enc.cfg = cfg;
    enc.code_emb = ps.add("pbs.code_emb",
                          Tensor::randn({tok::ImageCodebook::kCodes, cfg.width}, rng, stddev));
    enc.pos_emb = ps.add("pbs.pos_emb",
                         Tensor::randn({tok::SyntheticImage::kPatches, cfg.width}, rng, stddev));
    for (size_t l = 0; l < 2; ++l) {
        enc.layers.push_back(nn::make_encoder_layer(ps, "pbs.layer" + std::to_string(l),
                                                    cfg.width, cfg.width * 2, rng, stddev));
    }
    enc.final_gain = ps.add("pbs.final_ln", Tensor::full({1, cfg.width}, 1.0));
    return enc;
}

Tensor pbs_embed(Tape& tape, const tok::SyntheticImage& img, const PbsEncoder& enc,
                 const std::vector<size_t>& dropped_patches) {
    constexpr size_t kP = tok::SyntheticImage::kPatches;
    std::vector<int> codes(kP), patches(kP);
    for (size_t i = 0; i < kP; ++i) {
        codes[i] = img.codes[i];
        patches[i] = static_cast<int>(i);
    }
    Tensor code_rows = tape.gather_rows(enc.code_emb, codes);
    if (!dropped_patches.empty()) {
        Tensor keep = Tensor::full({kP}, 1.0);
        for (size_t p : dropped_patches) {
            if (p >= kP) throw ContractError("pbs_embed: dropped patch out of range");
            keep.data()[p] = 0.0;
        }
        code_rows = tape.mul_colvec(code_rows, keep);
    }
    Tensor x = tape.add(code_rows, tape.gather_rows(enc.pos_emb, patches));
    for (const auto& layer : enc.layers) {
        x = nn::encoder_layer(tape, layer, x, enc.cfg.n_heads, /*causal=*/false);
    }
    x = nn::rmsnorm(tape, x, enc.final_gain);
    Tensor pooled = tape.mean_rows(x);  // [1, width]
    Tensor inv_norm = tape.div(
        Tensor::full({1}, 1.0),
        tape.sqrt(tape.add_scalar(tape.sum_all(tape.mul(pooled, pooled)), 1e-12)));
    return tape.mul_colvec(pooled, inv_norm);
}

double pbs_score(const tok::SyntheticImage& a, const tok::SyntheticImage& b,
                 const PbsEncoder& enc) {
    Tape tape;
    tape.set_grad_enabled(false);
    Tensor ea = pbs_embed(tape, a, enc);
    Tensor eb = pbs_embed(tape, b, enc);
    return tape.sum_all(tape.mul(ea, eb)).item();
}

namespace {
std::vector<size_t> draw_dropout(size_t count, Rng& rng) {
    std::vector<size_t> out;
    while (out.size() < count) {
        const size_t p = static_cast<size_t>(rng.below(tok::SyntheticImage::kPatches));
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
    return out;
}
}  // namespace

std::vector<double> pbs_train(const std::vector<data::PbsPair>& pairs, PbsEncoder& enc,
                              nn::ParamSet& params, nn::ParamSet& adam_state, size_t steps,
                              Rng& rng) {
    if (pairs.size() < 64) {
        throw ContractError("pbs_train: need at least 64 pairs, got " +
                            std::to_string(pairs.size()));
    }
    nn::AdamW opt;
    opt.lr = enc.cfg.lr;
    opt.weight_decay = 0.0;
    const size_t batch = std::min(enc.cfg.batch, pairs.size());
    std::vector<double> curve;
    curve.reserve(steps);

    Tape tape;
    for (size_t step = 1; step <= steps; ++step) {
        std::vector<Tensor> anchors, positives, hards;
        for (size_t b = 0; b < batch; ++b) {
            const auto& pair = pairs[rng.below(pairs.size())];
            anchors.push_back(
                pbs_embed(tape, pair.a, enc, draw_dropout(enc.cfg.dropout_patches, rng)));
            positives.push_back(
                pbs_embed(tape, pair.a, enc, draw_dropout(enc.cfg.dropout_patches, rng)));
            hards.push_back(pbs_embed(tape, pair.b, enc));
        }
        Tensor a = anchors[0], p = positives[0], h = hards[0];
        for (size_t b = 1; b < batch; ++b) {
            a = tape.concat_rows(a, anchors[b]);
            p = tape.concat_rows(p, positives[b]);
            h = tape.concat_rows(h, hards[b]);
        }
        // Row i: [sim to every positive (diag = own), sim to own hard negative].
        Tensor in_batch = tape.matmul_nt(a, p);                      // [B,B]
        Tensor hard_col = tape.reshape(tape.sum_cols(tape.mul(a, h)), {batch, 1});
        Tensor logits = tape.scale(tape.concat_cols({in_batch, hard_col}),
                                   1.0 / enc.cfg.temperature);
        std::vector<int> targets(batch);
        for (size_t i = 0; i < batch; ++i) targets[i] = static_cast<int>(i);
        Tensor loss = tape.cross_entropy(logits, targets);
        curve.push_back(loss.item());
        if (!std::isfinite(curve.back())) {
            throw NumericError("pbs_train: non-finite loss at step " + std::to_string(step));
        }
        tape.backward(loss);
        opt.step(params, adam_state, static_cast<long long>(step));
        params.zero_grad();
        tape.reset();
    }
    return curve;
}

double pbs_gap(const PbsEncoder& enc, size_t n_products, Rng& rng) {
    double same_sum = 0, diff_sum = 0;
    for (size_t i = 0; i < n_products; ++i) {
        data::ProductSpec p =
            data::gen_product(static_cast<size_t>(rng.below(data::kNumCategories)), rng);
        auto pal = data::random_palette(rng);
        auto pal_other = data::random_palette(rng);
        while (data::same_palette(pal, pal_other)) pal_other = data::random_palette(rng);
        tok::SyntheticImage a = data::composite_image(p, pal, rng);
        tok::SyntheticImage same = data::composite_image(p, pal, rng);
        tok::SyntheticImage diff = data::composite_image(p, pal_other, rng);
        same_sum += pbs_score(a, same, enc);
        diff_sum += pbs_score(a, diff, enc);
    }
    return (same_sum - diff_sum) / static_cast<double>(n_products);
}

}  // namespace adgen::eval
