// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "adgen/nn.hpp"
#include "adgen/tensor.hpp"
#include "adgen/tokenizer.hpp"

namespace adgen::model {

struct ModelConfig {
    size_t d_model = 64;
    size_t n_layers = 8;
    size_t n_heads = 4;
    size_t vocab_size = 0;  // lexicon + image codes + specials; set from the Vocab
    size_t max_seq_len = 256;
    size_t inject_every = 4;   // add control after layers l with (l - offset) % every == 0
    size_t inject_offset = 0;  // 1-based layer indexing: defaults give layers {4, 8}
    double lambda_text = 1.0;
    double lambda_img = 1.0;
    size_t ffn_mult = 4;

    size_t ffn_dim() const { return d_model * ffn_mult; }
    void validate() const;
};

// Per-position control vectors; exactly zero outside the image segment.
struct ControlSignal {
    Tensor c;  // [T, d_model]
};

// Foreground perception path: patchify/projector over the transparent
// image's code one-hots plus mask bit, a small bidirectional encoder, and
// the control sequence layers projecting into the decoder's latent space.
struct ForegroundPerception {
    nn::Linear patch_proj;  // 17 -> d_model
    Tensor patch_pos;       // [16, d_model]
    std::vector<nn::EncoderLayer> encoder;
    Tensor enc_gain;
    nn::Linear ctrl1, ctrl2;  // control sequence layers
};

struct ModelParams {
    Tensor tok_emb;  // [V, d]
    Tensor pos_emb;  // [max_seq_len, d]
    std::vector<nn::EncoderLayer> layers;
    Tensor final_gain;
    nn::Linear head;  // d -> V
    ForegroundPerception fp;
};

// Registers all decoder + foreground-perception parameters into `ps` under
// "model." / "fp." prefixes.
ModelParams init_params(nn::ParamSet& ps, const ModelConfig& cfg, Rng& rng,
                        double stddev = 0.08);

// Continuous-prompt insertion: token embeddings at `positions` are replaced
// by the given rows before the positional embedding is added.
struct EmbeddingOverride {
    std::vector<size_t> positions;
    Tensor rows;  // [P, d_model]
};

// Patch-level control vectors for a transparent image: [16, d_model].
Tensor foreground_patch_controls(Tape& tape, const tok::SyntheticImage& transparent,
                                 const ForegroundPerception& fp, size_t n_heads);

// Maps patch k onto sequence position image_begin + k; all other positions
// are zero. The segment [image_begin, image_end) must have length 16.
ControlSignal encode_foreground(Tape& tape, const tok::SyntheticImage& transparent,
                                const ForegroundPerception& fp, size_t image_begin,
                                size_t image_end, size_t seq_len, const ModelConfig& cfg);

// Causal decoder stack with control injection; returns next-token logits
// per position, [T, vocab_size].
Tensor decoder_forward(Tape& tape, const std::vector<int>& ids, const ControlSignal* control,
                       const ModelParams& params, const ModelConfig& cfg,
                       const EmbeddingOverride* override_rows = nullptr);

// Mean NLL over the text segment (each t_i plus the closing </text>,
// conditioned on the instruction and preceding text). Instruction positions
// carry no loss. Empty text segment returns 0 and sets *warned.
Tensor loss_text(Tape& tape, const Tensor& logits, const tok::TokenSequence& seq,
                 bool* warned = nullptr);

// Mean NLL over the 16 image positions.
Tensor loss_image(Tape& tape, const Tensor& logits, const tok::TokenSequence& seq);

struct JointLoss {
    Tensor joint;
    Tensor text;
    Tensor image;
};

JointLoss loss_joint(Tape& tape, const tok::TokenSequence& seq, const ControlSignal* control,
                     const EmbeddingOverride* override_rows, const ModelParams& params,
                     const ModelConfig& cfg);

enum class GenMode { kGreedy, kTemperature };

struct GenResult {
    std::vector<int> text_ids;     // lexicon word ids
    std::vector<int> image_codes;  // codebook codes, length 16
};

// Autoregressive generation: text tokens until </text> (or max_text_words),
// then exactly 16 image tokens. Segment masking restricts text positions to
// lexicon ids + </text> and image positions to the codebook range.
// patch_controls, when given, is the [16,d] output of
// foreground_patch_controls and is injected at image positions as they are
// generated.
GenResult generate(const std::vector<int>& instruction, const Tensor* patch_controls,
                   const EmbeddingOverride* override_rows, const ModelParams& params,
                   const ModelConfig& cfg, const tok::Vocab& vocab, GenMode mode,
                   double temperature, Rng& rng, size_t max_text_words = 24);

struct BatchItem {
    tok::TokenSequence seq;
    const tok::SyntheticImage* transparent = nullptr;  // control input; may be null
    std::optional<EmbeddingOverride> override_rows;
};

// One AdamW update on the mean joint loss of the batch. The batch's
// override rows must already live on `tape` so extractor gradients flow.
// Throws NumericError on a non-finite loss. Resets the tape.
struct StepResult {
    double joint;
    double text;
    double image;
};
StepResult train_step(Tape& tape, const std::vector<BatchItem>& batch, nn::ParamSet& params,
                      nn::ParamSet& adam_state, const nn::AdamW& opt, long long step_t,
                      const ModelParams& model, const ModelConfig& cfg);

}  // namespace adgen::model
