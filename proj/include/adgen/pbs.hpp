// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "adgen/nn.hpp"
#include "adgen/synthdata.hpp"
#include "adgen/tensor.hpp"
#include "adgen/tokenizer.hpp"

namespace adgen::eval {

struct PbsConfig {
    size_t width = 32;
    size_t n_heads = 4;
    double temperature = 0.1;  // InfoNCE temperature
    size_t batch = 32;
    double lr = 1e-3;
    size_t dropout_patches = 4;  // patch-dropout augmentation strength
    void validate() const;
};

// Patch-embedding + small bidirectional encoder over code grids, mean-pooled
// and L2-normalized to a unit embedding.
struct PbsEncoder {
    PbsConfig cfg;
    Tensor code_emb;  // [16, width]
    Tensor pos_emb;   // [16, width]
    std::vector<nn::EncoderLayer> layers;
    Tensor final_gain;
};

// Registers parameters under "pbs." in ps.
PbsEncoder init_pbs(nn::ParamSet& ps, const PbsConfig& cfg, Rng& rng, double stddev = 0.08);

// Unit-norm embedding, [1, width]. dropped_patches zeroes the code feature
// of those patches (patch-dropout augmentation).
Tensor pbs_embed(Tape& tape, const tok::SyntheticImage& img, const PbsEncoder& enc,
                 const std::vector<size_t>& dropped_patches = {});

// Cosine similarity of the unit embeddings; symmetric, score(a,a) ~= 1.
double pbs_score(const tok::SyntheticImage& a, const tok::SyntheticImage& b,
                 const PbsEncoder& enc);

// InfoNCE over anchor/augmented-positive with the paired different-background
// image as an explicit hard negative plus in-batch negatives. Requires at
// least 64 pairs. Returns the per-step loss curve.
std::vector<double> pbs_train(const std::vector<data::PbsPair>& pairs, PbsEncoder& enc,
                              nn::ParamSet& params, nn::ParamSet& adam_state, size_t steps,
                              Rng& rng);

// Mean same-background minus different-background score over probe sets
// built from random products (the background-sensitivity gap).
double pbs_gap(const PbsEncoder& enc, size_t n_products, Rng& rng);

}  // namespace adgen::eval
