// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "adgen/model.hpp"
#include "adgen/nn.hpp"
#include "adgen/tensor.hpp"
#include "adgen/tokenizer.hpp"

namespace adgen::pref {

// One historical click: the ad image and title the user clicked, plus the
// product's description words used for similarity scoring.
struct HistoryItem {
    tok::SyntheticImage image;
    std::vector<std::string> text;          // ad title words
    std::vector<std::string> product_text;  // description words
};

enum class Modality { kVisual, kTextual };

// Cosine similarity between term-frequency bags of the history products'
// texts and the target description. Values lie in [0, 1] for term counts.
std::vector<double> compute_similarity(const std::vector<HistoryItem>& history,
                                       const std::vector<std::string>& target_description);

double cosine_bag_similarity(const std::vector<std::string>& a,
                             const std::vector<std::string>& b);

// p_i = max(s_i + eps, 0) / sum_j max(s_j + eps, 0); uniform fallback when
// every numerator is zero.
std::vector<double> sampling_weights(const std::vector<double>& s, double epsilon = 1e-6);

// Up to n draws without replacement by sequential renormalization of p;
// returns indices in draw order. If fewer than n items exist, all are drawn.
std::vector<size_t> sample_history_indices(const std::vector<double>& p, size_t n, Rng& rng);
std::vector<HistoryItem> sample_histories(const std::vector<HistoryItem>& history,
                                          const std::vector<double>& p, size_t n, Rng& rng);

// Relevance extractors, per-modality feedforward f, fusion encoder PF, and
// the modality input encoders.
struct ExtractorParams {
    size_t d_model = 0;
    size_t n_heads = 0;
    Tensor vis_code_emb;  // [16, d]
    Tensor vis_pos_emb;   // [16, d]
    Tensor txt_word_emb;  // [lexicon, d]
    std::vector<nn::EncoderLayer> vis_extractor;
    std::vector<nn::EncoderLayer> txt_extractor;
    Tensor vis_gain, txt_gain;
    nn::Linear f_vis1, f_vis2, f_txt1, f_txt2;
    std::vector<nn::EncoderLayer> fusion;
};

// Registers everything under "pref." in ps.
ExtractorParams init_extractor(nn::ParamSet& ps, size_t d_model, size_t n_heads,
                               size_t lexicon_size, Rng& rng, double stddev = 0.08);

// Token embeddings e_in for the sampled items: visual tokens are one code
// embedding per patch (plus patch position), textual tokens one word
// embedding per title word, concatenated across items.
Tensor encode_history_tokens(Tape& tape, const std::vector<HistoryItem>& items,
                             Modality modality, const ExtractorParams& params,
                             const tok::Vocab& vocab);

// kHard: K-hot straight-through mask (training/inference behavior).
// kSoft: the mask is the soft Gumbel distribution itself — the exact path
// the straight-through backward follows, so finite differences can verify
// the whole chain.
enum class MaskMode { kHard, kSoft };

// Relevance extraction: encoder output vs input cosine scores, Gumbel
// top-K mask with K = max(1, ceil(keep_ratio * T)), masked rows zeroed,
// shape preserved, straight-through gradients to the scores.
Tensor relevance_extract(Tape& tape, const std::vector<HistoryItem>& items, Modality modality,
                         const ExtractorParams& params, const tok::Vocab& vocab,
                         double keep_ratio, double temperature, Rng& rng,
                         MaskMode mode = MaskMode::kHard);

struct PreferenceTokens {
    Tensor fused_visual;    // [Tv, d]
    Tensor fused_textual;   // [Tt, d]
    Tensor pooled_visual;   // [1, d]
    Tensor pooled_textual;  // [1, d]
};

// f(e)+e per modality, concatenate, run the fusion encoder, split back by
// the original lengths, and mean-pool each split for instruction insertion.
PreferenceTokens fuse_preferences(Tape& tape, const Tensor& e_v, const Tensor& e_t,
                                  const ExtractorParams& params);

// Continuous-prompt insertion: the single <image_ph>/<text_ph> positions of
// the instruction are overridden with the pooled preference vectors.
model::EmbeddingOverride build_personalized_instruction(Tape& tape,
                                                        const std::vector<int>& instruction,
                                                        const PreferenceTokens& prefs,
                                                        const tok::Vocab& vocab);

// Same insertion from raw pooled vectors ([1,d] each); used by the simpler
// mean-pooled ablation modes.
model::EmbeddingOverride make_preference_override(Tape& tape,
                                                  const std::vector<int>& instruction,
                                                  const Tensor& pooled_visual,
                                                  const Tensor& pooled_textual,
                                                  const tok::Vocab& vocab);

// Zero preference vectors for history-free generation: placeholders embed
// as zero rows.
model::EmbeddingOverride zero_preference_override(const std::vector<int>& instruction,
                                                  size_t d_model, const tok::Vocab& vocab);

}  // namespace adgen::pref
