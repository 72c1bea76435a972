// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "adgen/model.hpp"
#include "adgen/nn.hpp"
#include "adgen/tokenizer.hpp"

namespace testutil {

// Small fixture shared by the model/preference tests: a 12-word lexicon and
// a micro decoder configuration.
inline adgen::tok::Vocab micro_vocab() {
    return adgen::tok::Vocab({"soft", "red", "chair", "lamp", "cozy", "premium", "wood",
                              "style", "the", "and", "text", "image"});
}

inline adgen::model::ModelConfig micro_cfg(const adgen::tok::Vocab& vocab) {
    adgen::model::ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.vocab_size = vocab.model_vocab_size();
    cfg.max_seq_len = 64;
    cfg.inject_every = 2;  // inject after layer 2 with two layers
    cfg.ffn_mult = 2;
    return cfg;
}

inline adgen::tok::SyntheticImage transparent_image(std::uint8_t color,
                                                    std::initializer_list<size_t> fg) {
    adgen::tok::SyntheticImage img;
    img.mask.emplace();
    img.mask->fill(false);
    for (size_t i : fg) {
        img.codes[i] = color;
        (*img.mask)[i] = true;
    }
    return img;
}

inline adgen::tok::TokenSequence micro_seq(const adgen::tok::Vocab& vocab,
                                           const std::vector<std::string>& instr,
                                           const std::vector<std::string>& text,
                                           const std::vector<int>& image_codes) {
    return adgen::tok::assemble_sequence(adgen::tok::encode_text(instr, vocab),
                                         adgen::tok::encode_text(text, vocab), image_codes,
                                         vocab);
}

inline void zero_params_with_prefix(adgen::nn::ParamSet& ps, const std::string& prefix) {
    for (const auto& [name, t] : ps.items()) {
        if (name.rfind(prefix, 0) == 0) {
            adgen::Tensor mt = t;
            std::fill(mt.data().begin(), mt.data().end(), 0.0);
        }
    }
}

inline bool bitwise_equal_params(const adgen::nn::ParamSet& a, const adgen::nn::ParamSet& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.items().size(); ++i) {
        const auto& ta = a.items()[i].second;
        const auto& tb = b.items()[i].second;
        if (ta.numel() != tb.numel()) return false;
        for (size_t j = 0; j < ta.numel(); ++j) {
            if (ta.data()[j] != tb.data()[j]) return false;
        }
    }
    return true;
}

}  // namespace testutil
