// SPDX-License-Identifier: Apache-2.0
#include "adgen/preference.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace adgen::pref {

double cosine_bag_similarity(const std::vector<std::string>& a,
                             const std::vector<std::string>& b) {
    std::map<std::string, double> ca, cb;
    for (const auto& w : a) ca[w] += 1.0;
    for (const auto& w : b) cb[w] += 1.0;
    double dot = 0, na = 0, nb = 0;
    for (const auto& [w, c] : ca) {
        na += c * c;
        auto it = cb.find(w);
        if (it != cb.end()) dot += c * it->second;
    }
    for (const auto& [w, c] : cb) nb += c * c;
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> compute_similarity(const std::vector<HistoryItem>& history,
                                       const std::vector<std::string>& target_description) {
    if (history.empty()) throw ContractError("compute_similarity: empty history");
    if (target_description.empty()) {
        throw ContractError("compute_similarity: empty target description");
    }
    std::vector<double> s;
    s.reserve(history.size());
    for (const HistoryItem& h : history) {
        s.push_back(cosine_bag_similarity(h.product_text, target_description));
    }
    return s;
}

std::vector<double> sampling_weights(const std::vector<double>& s, double epsilon) {
    if (s.empty()) throw ContractError("sampling_weights: empty score vector");
    std::vector<double> p(s.size());
    double total = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        p[i] = std::max(s[i] + epsilon, 0.0);
        total += p[i];
    }
    if (total <= 0) {
        // Every numerator clipped to zero: fall back to uniform.
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(s.size()));
        return p;
    }
    for (double& v : p) v /= total;
    return p;
}

std::vector<size_t> sample_history_indices(const std::vector<double>& p, size_t n, Rng& rng) {
    if (n < 1) throw ContractError("sample_history_indices: n must be >= 1");
    std::vector<size_t> remaining(p.size());
    for (size_t i = 0; i < p.size(); ++i) remaining[i] = i;
    std::vector<size_t> out;
    const size_t want = std::min(n, p.size());
    while (out.size() < want) {
        std::vector<double> w(remaining.size());
        double total = 0;
        for (size_t i = 0; i < remaining.size(); ++i) {
            w[i] = p[remaining[i]];
            total += w[i];
        }
        size_t pick;
        if (total <= 0) {
            pick = static_cast<size_t>(rng.below(remaining.size()));
        } else {
            pick = rng.weighted_pick(w);
        }
        out.push_back(remaining[pick]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

std::vector<HistoryItem> sample_histories(const std::vector<HistoryItem>& history,
                                          const std::vector<double>& p, size_t n, Rng& rng) {
    if (p.size() != history.size()) {
        throw ContractError("sample_histories: weight count does not match history size");
    }
    std::vector<HistoryItem> out;
    for (size_t idx : sample_history_indices(p, n, rng)) out.push_back(history[idx]);
    return out;
}

ExtractorParams init_extractor(nn::ParamSet& ps, size_t d_model, size_t n_heads,
                               size_t lexicon_size, Rng& rng, double stddev) {
    ExtractorParams e;
    e.d_model = d_model;
    e.n_heads = n_heads;
    e.vis_code_emb =
        ps.add("pref.vis_code_emb",
               Tensor::randn({tok::ImageCodebook::kCodes, d_model}, rng, stddev));
    e.vis_pos_emb = ps.add("pref.vis_pos_emb",
                           Tensor::randn({tok::SyntheticImage::kPatches, d_model}, rng, stddev));
    e.txt_word_emb =
        ps.add("pref.txt_word_emb", Tensor::randn({lexicon_size, d_model}, rng, stddev));
    for (size_t l = 0; l < 2; ++l) {
        e.vis_extractor.push_back(nn::make_encoder_layer(
            ps, "pref.vis_layer" + std::to_string(l), d_model, d_model * 2, rng, stddev));
        e.txt_extractor.push_back(nn::make_encoder_layer(
            ps, "pref.txt_layer" + std::to_string(l), d_model, d_model * 2, rng, stddev));
        e.fusion.push_back(nn::make_encoder_layer(ps, "pref.fusion_layer" + std::to_string(l),
                                                  d_model, d_model * 2, rng, stddev));
    }
    e.vis_gain = ps.add("pref.vis_ln", Tensor::full({1, d_model}, 1.0));
    e.txt_gain = ps.add("pref.txt_ln", Tensor::full({1, d_model}, 1.0));
    e.f_vis1 = nn::make_linear(ps, "pref.f_vis1", d_model, d_model * 2, rng, stddev);
    e.f_vis2 = nn::make_linear(ps, "pref.f_vis2", d_model * 2, d_model, rng, stddev);
    e.f_txt1 = nn::make_linear(ps, "pref.f_txt1", d_model, d_model * 2, rng, stddev);
    e.f_txt2 = nn::make_linear(ps, "pref.f_txt2", d_model * 2, d_model, rng, stddev);
    return e;
}

Tensor encode_history_tokens(Tape& tape, const std::vector<HistoryItem>& items,
                             Modality modality, const ExtractorParams& params,
                             const tok::Vocab& vocab) {
    if (items.empty()) throw ContractError("encode_history_tokens: no items");
    if (modality == Modality::kVisual) {
        std::vector<int> codes, patches;
        for (const HistoryItem& it : items) {
            for (size_t k = 0; k < tok::SyntheticImage::kPatches; ++k) {
                codes.push_back(it.image.codes[k]);
                patches.push_back(static_cast<int>(k));
            }
        }
        return tape.add(tape.gather_rows(params.vis_code_emb, codes),
                        tape.gather_rows(params.vis_pos_emb, patches));
    }
    std::vector<int> words;
    for (const HistoryItem& it : items) {
        if (it.text.empty()) throw ContractError("encode_history_tokens: item with empty text");
        for (const std::string& w : it.text) words.push_back(vocab.word_id(w));
    }
    return tape.gather_rows(params.txt_word_emb, words);
}

namespace {

Tensor extractor_forward(Tape& tape, const Tensor& e_in, const ExtractorParams& params,
                         Modality modality) {
    const auto& stack = modality == Modality::kVisual ? params.vis_extractor
                                                      : params.txt_extractor;
    const Tensor& gain = modality == Modality::kVisual ? params.vis_gain : params.txt_gain;
    Tensor x = e_in;
    for (const auto& layer : stack) {
        x = nn::encoder_layer(tape, layer, x, params.n_heads, /*causal=*/false);
    }
    return nn::rmsnorm(tape, x, gain);
}

// Per-token cosine similarity between rows of a and b: [T].
Tensor row_cosine(Tape& tape, const Tensor& a, const Tensor& b) {
    Tensor num = tape.sum_cols(tape.mul(a, b));
    Tensor den = tape.mul(tape.sqrt(tape.add_scalar(tape.sum_cols(tape.mul(a, a)), 1e-12)),
                          tape.sqrt(tape.add_scalar(tape.sum_cols(tape.mul(b, b)), 1e-12)));
    return tape.div(num, den);
}

}  // namespace

Tensor relevance_extract(Tape& tape, const std::vector<HistoryItem>& items, Modality modality,
                         const ExtractorParams& params, const tok::Vocab& vocab,
                         double keep_ratio, double temperature, Rng& rng, MaskMode mode) {
    if (keep_ratio <= 0.0 || keep_ratio > 1.0) {
        throw ParamError("relevance_extract: keep_ratio must be in (0,1], got " +
                         std::to_string(keep_ratio));
    }
    Tensor e_in = encode_history_tokens(tape, items, modality, params, vocab);
    const size_t t = e_in.rows();
    Tensor e_out = extractor_forward(tape, e_in, params, modality);
    Tensor scores = row_cosine(tape, e_in, e_out);
    const size_t k = std::max<size_t>(
        1, static_cast<size_t>(std::ceil(keep_ratio * static_cast<double>(t) - 1e-9)));
    Tensor mask = mode == MaskMode::kHard
                      ? tape.gumbel_topk_mask(scores, k, temperature, rng)
                      : tape.gumbel_softmax(scores, temperature, rng, /*hard=*/false);
    return tape.mul_colvec(e_in, mask);
}

PreferenceTokens fuse_preferences(Tape& tape, const Tensor& e_v, const Tensor& e_t,
                                  const ExtractorParams& params) {
    if (e_v.cols() != params.d_model || e_t.cols() != params.d_model) {
        throw ContractError("fuse_preferences: token width does not match d_model");
    }
    Tensor fv = tape.add(
        nn::linear(tape, params.f_vis2, tape.relu(nn::linear(tape, params.f_vis1, e_v))), e_v);
    Tensor ft = tape.add(
        nn::linear(tape, params.f_txt2, tape.relu(nn::linear(tape, params.f_txt1, e_t))), e_t);
    Tensor x = tape.concat_rows(fv, ft);
    for (const auto& layer : params.fusion) {
        x = nn::encoder_layer(tape, layer, x, params.n_heads, /*causal=*/false);
    }
    PreferenceTokens out;
    out.fused_visual = tape.slice_rows(x, 0, e_v.rows());
    out.fused_textual = tape.slice_rows(x, e_v.rows(), e_v.rows() + e_t.rows());
    out.pooled_visual = tape.mean_rows(out.fused_visual);
    out.pooled_textual = tape.mean_rows(out.fused_textual);
    return out;
}

namespace {
size_t find_single_placeholder(const std::vector<int>& instruction, int id, const char* name) {
    size_t pos = instruction.size();
    size_t count = 0;
    for (size_t i = 0; i < instruction.size(); ++i) {
        if (instruction[i] == id) {
            pos = i;
            ++count;
        }
    }
    if (count != 1) {
        throw TemplateError(std::string("instruction must contain exactly one ") + name +
                            ", found " + std::to_string(count));
    }
    return pos;
}
}  // namespace

model::EmbeddingOverride make_preference_override(Tape& tape,
                                                  const std::vector<int>& instruction,
                                                  const Tensor& pooled_visual,
                                                  const Tensor& pooled_textual,
                                                  const tok::Vocab& vocab) {
    const size_t img_pos = find_single_placeholder(
        instruction, vocab.special(tok::Vocab::kImagePh), "<image_ph>");
    const size_t txt_pos = find_single_placeholder(
        instruction, vocab.special(tok::Vocab::kTextPh), "<text_ph>");
    model::EmbeddingOverride ov;
    ov.positions = {img_pos, txt_pos};
    ov.rows = tape.concat_rows(pooled_visual, pooled_textual);
    return ov;
}

model::EmbeddingOverride build_personalized_instruction(Tape& tape,
                                                        const std::vector<int>& instruction,
                                                        const PreferenceTokens& prefs,
                                                        const tok::Vocab& vocab) {
    return make_preference_override(tape, instruction, prefs.pooled_visual,
                                    prefs.pooled_textual, vocab);
}

model::EmbeddingOverride zero_preference_override(const std::vector<int>& instruction,
                                                  size_t d_model, const tok::Vocab& vocab) {
    const size_t img_pos = find_single_placeholder(
        instruction, vocab.special(tok::Vocab::kImagePh), "<image_ph>");
    const size_t txt_pos = find_single_placeholder(
        instruction, vocab.special(tok::Vocab::kTextPh), "<text_ph>");
    model::EmbeddingOverride ov;
    ov.positions = {img_pos, txt_pos};
    ov.rows = Tensor::zeros({2, d_model});
    return ov;
}

}  // namespace adgen::pref
