// SPDX-License-Identifier: Apache-2.0
#include "adgen/model.hpp"

#include <cmath>

namespace adgen::model {

void ModelConfig::validate() const {
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
        throw ConfigError("model.d_model must be positive and divisible by n_heads");
    }
    if (n_layers == 0) throw ConfigError("model.n_layers must be >= 1");
    if (inject_every < 1 || inject_every > n_layers) {
        throw ConfigError("model.inject_every must be in [1, n_layers]");
    }
    if (inject_offset >= n_layers) {
        throw ConfigError("model.inject_offset must be < n_layers");
    }
    if (lambda_text < 0 || lambda_img < 0) {
        throw ConfigError("model.lambda_text and model.lambda_img must be >= 0");
    }
    if (vocab_size == 0) throw ConfigError("model.vocab_size must be set");
    if (max_seq_len < 24) throw ConfigError("model.max_seq_len too small");
    if (ffn_mult == 0) throw ConfigError("model.ffn_mult must be >= 1");
}

ModelParams init_params(nn::ParamSet& ps, const ModelConfig& cfg, Rng& rng, double stddev) {
    cfg.validate();
    ModelParams p;
    p.tok_emb = ps.add("model.tok_emb", Tensor::randn({cfg.vocab_size, cfg.d_model}, rng, stddev));
    p.pos_emb = ps.add("model.pos_emb", Tensor::randn({cfg.max_seq_len, cfg.d_model}, rng, stddev));
    for (size_t l = 0; l < cfg.n_layers; ++l) {
        p.layers.push_back(nn::make_encoder_layer(ps, "model.layer" + std::to_string(l),
                                                  cfg.d_model, cfg.ffn_dim(), rng, stddev));
    }
    p.final_gain = ps.add("model.final_ln", Tensor::full({1, cfg.d_model}, 1.0));
    p.head = nn::make_linear(ps, "model.head", cfg.d_model, cfg.vocab_size, rng, stddev);

    p.fp.patch_proj = nn::make_linear(ps, "fp.patch_proj", 17, cfg.d_model, rng, stddev);
    p.fp.patch_pos = ps.add("fp.patch_pos",
                            Tensor::randn({tok::SyntheticImage::kPatches, cfg.d_model}, rng, stddev));
    for (size_t l = 0; l < 2; ++l) {
        p.fp.encoder.push_back(nn::make_encoder_layer(ps, "fp.layer" + std::to_string(l),
                                                      cfg.d_model, cfg.d_model * 2, rng, stddev));
    }
    p.fp.enc_gain = ps.add("fp.enc_ln", Tensor::full({1, cfg.d_model}, 1.0));
    p.fp.ctrl1 = nn::make_linear(ps, "fp.ctrl1", cfg.d_model, cfg.d_model, rng, stddev);
    p.fp.ctrl2 = nn::make_linear(ps, "fp.ctrl2", cfg.d_model, cfg.d_model, rng, stddev);
    return p;
}

Tensor foreground_patch_controls(Tape& tape, const tok::SyntheticImage& transparent,
                                 const ForegroundPerception& fp, size_t n_heads) {
    if (!transparent.mask) {
        throw ContractError("foreground_patch_controls: transparent image has no mask");
    }
    constexpr size_t kP = tok::SyntheticImage::kPatches;
    // Patch features: code one-hot (zeroed on transparent patches) + mask bit.
    Tensor feat = Tensor::zeros({kP, 17});
    for (size_t i = 0; i < kP; ++i) {
        const bool fg = (*transparent.mask)[i];
        if (fg) feat.at(i, transparent.codes[i]) = 1.0;
        feat.at(i, 16) = fg ? 1.0 : 0.0;
    }
    Tensor x = tape.add(nn::linear(tape, fp.patch_proj, feat), fp.patch_pos);
    for (const auto& layer : fp.encoder) {
        x = nn::encoder_layer(tape, layer, x, n_heads, /*causal=*/false);
    }
    x = nn::rmsnorm(tape, x, fp.enc_gain);
    return nn::linear(tape, fp.ctrl2, tape.relu(nn::linear(tape, fp.ctrl1, x)));
}

ControlSignal encode_foreground(Tape& tape, const tok::SyntheticImage& transparent,
                                const ForegroundPerception& fp, size_t image_begin,
                                size_t image_end, size_t seq_len, const ModelConfig& cfg) {
    constexpr size_t kP = tok::SyntheticImage::kPatches;
    if (image_end - image_begin != kP) {
        throw ContractError("encode_foreground: image segment length must be 16, got " +
                            std::to_string(image_end - image_begin));
    }
    if (image_end > seq_len || seq_len > cfg.max_seq_len) {
        throw ContractError("encode_foreground: segment range outside the sequence");
    }
    Tensor patches = foreground_patch_controls(tape, transparent, fp, cfg.n_heads);
    std::vector<size_t> positions(kP);
    for (size_t k = 0; k < kP; ++k) positions[k] = image_begin + k;
    ControlSignal sig;
    sig.c = tape.overwrite_rows(Tensor::zeros({seq_len, cfg.d_model}), positions, patches);
    return sig;
}

namespace {
bool injects_after_layer(const ModelConfig& cfg, size_t l_one_based) {
    if (l_one_based < 1 + cfg.inject_offset) return false;
    return (l_one_based - cfg.inject_offset) % cfg.inject_every == 0;
}
}  // namespace

Tensor decoder_forward(Tape& tape, const std::vector<int>& ids, const ControlSignal* control,
                       const ModelParams& params, const ModelConfig& cfg,
                       const EmbeddingOverride* override_rows) {
    const size_t t = ids.size();
    if (t == 0) throw ContractError("decoder_forward: empty sequence");
    if (t > cfg.max_seq_len) {
        throw LengthError("sequence length " + std::to_string(t) + " exceeds max_seq_len " +
                          std::to_string(cfg.max_seq_len));
    }
    if (control && (control->c.rows() != t || control->c.cols() != cfg.d_model)) {
        throw ShapeError("decoder_forward: control shape " + control->c.shape_str() +
                         " does not match sequence");
    }
    Tensor x = tape.gather_rows(params.tok_emb, ids);
    if (override_rows && !override_rows->positions.empty()) {
        x = tape.overwrite_rows(x, override_rows->positions, override_rows->rows);
    }
    x = tape.add(x, tape.slice_rows(params.pos_emb, 0, t));
    for (size_t l = 0; l < cfg.n_layers; ++l) {
        x = nn::encoder_layer(tape, params.layers[l], x, cfg.n_heads, /*causal=*/true);
        if (control && injects_after_layer(cfg, l + 1)) {
            x = tape.add(x, control->c);
        }
    }
    x = nn::rmsnorm(tape, x, params.final_gain);
    return nn::linear(tape, params.head, x);
}

namespace {
void check_seq(const Tensor& logits, const tok::TokenSequence& seq) {
    const size_t expect = seq.n_instr + seq.m_text + tok::TokenSequence::kImageLen + 4;
    if (seq.ids.size() != expect) {
        throw ContractError("token sequence is malformed: length " +
                            std::to_string(seq.ids.size()) + ", expected " +
                            std::to_string(expect));
    }
    if (logits.rows() != seq.ids.size()) {
        throw ShapeError("logits rows do not match sequence length");
    }
}
}  // namespace

Tensor loss_text(Tape& tape, const Tensor& logits, const tok::TokenSequence& seq, bool* warned) {
    check_seq(logits, seq);
    if (warned) *warned = false;
    if (seq.m_text == 0) {
        if (warned) *warned = true;
        return Tensor::scalar(0.0);
    }
    // Rows text_open .. text_end-1 predict t_0..t_{M-1} and the </text> stop.
    Tensor rows = tape.slice_rows(logits, seq.text_open_pos(), seq.text_end());
    std::vector<int> targets(seq.ids.begin() + seq.text_begin(),
                             seq.ids.begin() + seq.text_end() + 1);
    return tape.cross_entropy(rows, targets);
}

Tensor loss_image(Tape& tape, const Tensor& logits, const tok::TokenSequence& seq) {
    check_seq(logits, seq);
    Tensor rows = tape.slice_rows(logits, seq.image_open_pos(),
                                  seq.image_open_pos() + tok::TokenSequence::kImageLen);
    std::vector<int> targets(seq.ids.begin() + seq.image_begin(),
                             seq.ids.begin() + seq.image_end());
    return tape.cross_entropy(rows, targets);
}

JointLoss loss_joint(Tape& tape, const tok::TokenSequence& seq, const ControlSignal* control,
                     const EmbeddingOverride* override_rows, const ModelParams& params,
                     const ModelConfig& cfg) {
    Tensor logits = decoder_forward(tape, seq.ids, control, params, cfg, override_rows);
    JointLoss out;
    out.text = loss_text(tape, logits, seq);
    out.image = loss_image(tape, logits, seq);
    out.joint = tape.add(tape.scale(out.text, cfg.lambda_text),
                         tape.scale(out.image, cfg.lambda_img));
    return out;
}

namespace {

int pick_token(const Tensor& logits_row, const std::vector<int>& allowed, GenMode mode,
               double temperature, Rng& rng) {
    if (mode == GenMode::kGreedy) {
        int best = allowed[0];
        double best_v = logits_row.at(static_cast<size_t>(allowed[0]));
        for (int id : allowed) {
            const double v = logits_row.at(static_cast<size_t>(id));
            if (v > best_v) {
                best_v = v;
                best = id;
            }
        }
        return best;
    }
    if (temperature <= 0) throw ParamError("generate: temperature must be > 0");
    double mx = -1e300;
    for (int id : allowed) mx = std::max(mx, logits_row.at(static_cast<size_t>(id)));
    std::vector<double> w(allowed.size());
    for (size_t i = 0; i < allowed.size(); ++i) {
        w[i] = std::exp((logits_row.at(static_cast<size_t>(allowed[i])) - mx) / temperature);
    }
    return allowed[rng.weighted_pick(w)];
}

Tensor last_row_logits(Tape& tape, const std::vector<int>& ids, const Tensor* patch_controls,
                       size_t image_begin_or_zero, const EmbeddingOverride* override_rows,
                       const ModelParams& params, const ModelConfig& cfg) {
    ControlSignal sig;
    const ControlSignal* ctrl = nullptr;
    if (patch_controls && image_begin_or_zero > 0 && ids.size() > image_begin_or_zero) {
        // Place the controls of the patches generated so far.
        const size_t k = std::min(ids.size() - image_begin_or_zero,
                                  tok::SyntheticImage::kPatches);
        std::vector<size_t> positions(k);
        for (size_t i = 0; i < k; ++i) positions[i] = image_begin_or_zero + i;
        Tensor rows = tape.slice_rows(*patch_controls, 0, k);
        sig.c = tape.overwrite_rows(Tensor::zeros({ids.size(), cfg.d_model}), positions, rows);
        ctrl = &sig;
    }
    Tensor logits = decoder_forward(tape, ids, ctrl, params, cfg, override_rows);
    return tape.slice_rows(logits, logits.rows() - 1, logits.rows());
}

}  // namespace

GenResult generate(const std::vector<int>& instruction, const Tensor* patch_controls,
                   const EmbeddingOverride* override_rows, const ModelParams& params,
                   const ModelConfig& cfg, const tok::Vocab& vocab, GenMode mode,
                   double temperature, Rng& rng, size_t max_text_words) {
    const size_t worst_len = instruction.size() + max_text_words +
                             tok::TokenSequence::kImageLen + 4;
    if (worst_len > cfg.max_seq_len) {
        throw LengthError("instruction of length " + std::to_string(instruction.size()) +
                          " cannot fit the generation context (needs " +
                          std::to_string(worst_len) + " of " + std::to_string(cfg.max_seq_len) +
                          ")");
    }

    std::vector<int> allowed_text;
    for (size_t w = 0; w < vocab.lexicon_size(); ++w) allowed_text.push_back((int)w);
    allowed_text.push_back(vocab.special(tok::Vocab::kTextClose));
    std::vector<int> allowed_image;
    for (size_t c = 0; c < tok::ImageCodebook::kCodes; ++c) {
        allowed_image.push_back(vocab.image_token((int)c));
    }

    Tape tape;
    tape.set_grad_enabled(false);

    std::vector<int> ids = instruction;
    ids.push_back(vocab.special(tok::Vocab::kTextOpen));

    GenResult out;
    while (out.text_ids.size() < max_text_words) {
        Tensor row = last_row_logits(tape, ids, nullptr, 0, override_rows, params, cfg);
        const int next = pick_token(row, allowed_text, mode, temperature, rng);
        if (next == vocab.special(tok::Vocab::kTextClose)) break;
        out.text_ids.push_back(next);
        ids.push_back(next);
    }
    ids.push_back(vocab.special(tok::Vocab::kTextClose));
    ids.push_back(vocab.special(tok::Vocab::kImageOpen));

    const size_t image_begin = ids.size();
    for (size_t k = 0; k < tok::SyntheticImage::kPatches; ++k) {
        Tensor row = last_row_logits(tape, ids, patch_controls, image_begin, override_rows,
                                     params, cfg);
        const int next = pick_token(row, allowed_image, mode, temperature, rng);
        out.image_codes.push_back(vocab.image_code(next));
        ids.push_back(next);
    }
    return out;
}

StepResult train_step(Tape& tape, const std::vector<BatchItem>& batch, nn::ParamSet& params,
                      nn::ParamSet& adam_state, const nn::AdamW& opt, long long step_t,
                      const ModelParams& model, const ModelConfig& cfg) {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    Tensor total = Tensor::scalar(0.0);
    Tensor total_text = Tensor::scalar(0.0);
    Tensor total_image = Tensor::scalar(0.0);
    for (const BatchItem& item : batch) {
        ControlSignal sig;
        const ControlSignal* ctrl = nullptr;
        if (item.transparent) {
            sig = encode_foreground(tape, *item.transparent, model.fp, item.seq.image_begin(),
                                    item.seq.image_end(), item.seq.ids.size(), cfg);
            ctrl = &sig;
        }
        const EmbeddingOverride* ov =
            item.override_rows.has_value() ? &*item.override_rows : nullptr;
        JointLoss jl = loss_joint(tape, item.seq, ctrl, ov, model, cfg);
        total = tape.add(total, jl.joint);
        total_text = tape.add(total_text, jl.text);
        total_image = tape.add(total_image, jl.image);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    Tensor loss = tape.scale(total, inv);
    StepResult res{loss.item(), total_text.item() * inv, total_image.item() * inv};
    if (!std::isfinite(res.joint)) {
        throw NumericError("train_step: non-finite loss at step " + std::to_string(step_t));
    }
    tape.backward(loss);
    opt.step(params, adam_state, step_t);
    params.zero_grad();
    tape.reset();
    return res;
}

}  // namespace adgen::model
