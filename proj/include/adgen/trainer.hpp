// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "adgen/checkpoint.hpp"
#include "adgen/config.hpp"
#include "adgen/model.hpp"
#include "adgen/pbs.hpp"
#include "adgen/preference.hpp"
#include "adgen/synthdata.hpp"

namespace adgen::run {

// Full training/inference state for one run: vocab, dataset, decoder +
// foreground-perception + extractor parameters, optimizer state, and the
// PBS encoder. Every stochastic choice derives from cfg.seed through
// labeled child rng streams, so a run is replayable from any step.
struct Trainer {
    RunConfig cfg;
    std::string config_digest_hex;
    tok::Vocab vocab;
    tok::ImageCodebook codebook;
    std::vector<std::string> templates;
    data::DatasetSplit dataset;
    std::string dataset_hash;

    nn::ParamSet params;  // model.* fp.* pref.*
    model::ModelParams mp;
    pref::ExtractorParams ex;
    nn::ParamSet adam_state;

    nn::ParamSet pbs_params;
    eval::PbsEncoder pbs_enc;
    nn::ParamSet pbs_adam;

    long long step = 0;

    explicit Trainer(const RunConfig& cfg);
};

std::unique_ptr<Trainer> make_trainer(const RunConfig& cfg, data::DatasetSplit dataset,
                                      std::string dataset_hash);

// Rebuilds a trainer from a checkpoint's embedded config and restores every
// tensor set and the step counter.
std::unique_ptr<Trainer> trainer_from_checkpoint(const LoadedCheckpoint& ckpt,
                                                 data::DatasetSplit dataset,
                                                 std::string dataset_hash);

void save_trainer_checkpoint(const Trainer& tr, const std::string& path);

// Linear Gumbel-temperature anneal over the configured steps.
double gumbel_tau(const RunConfig& cfg, long long step);

// History selection for one user under the given mode/strategy. Baseline
// returns an empty list without ever reading the history.
std::vector<pref::HistoryItem> select_history(const data::UserRecord& user,
                                              AblationMode mode, SamplingStrategy strategy,
                                              size_t n_sample, double epsilon, Rng& rng);

std::vector<int> build_instruction(const Trainer& tr, const data::UserRecord& user, Rng& rng);

// Preference override for one user: zero vectors (baseline), mean-pooled
// input tokens (with_history / with_pss), or the extract-and-fuse path
// (full).
model::EmbeddingOverride build_override(const Trainer& tr, Tape& tape,
                                        const data::UserRecord& user,
                                        const std::vector<int>& instruction,
                                        AblationMode mode, double tau, Rng& rng);

// One optimizer step on a freshly drawn batch; advances tr.step.
model::StepResult run_one_step(Trainer& tr);

// Runs model training from tr.step+1 through cfg.training.steps. Returns the
// per-step joint-loss curve for the segment; on_checkpoint fires every
// cfg.training.checkpoint_every steps and at the end.
std::vector<double> train_model(Trainer& tr,
                                const std::function<void(long long)>& on_checkpoint = {});

// Contrastive training of the PBS encoder on synthetic pairs; returns the
// loss curve.
std::vector<double> train_pbs_encoder(Trainer& tr);

struct GeneratedAd {
    std::vector<std::string> title;
    tok::SyntheticImage image;
};

// Greedy by default; deterministic per (cfg.seed, user_id).
GeneratedAd generate_for_user(const Trainer& tr, const data::UserRecord& user,
                              bool use_control = true,
                              model::GenMode mode = model::GenMode::kGreedy,
                              double temperature = 1.0);

// Generation from explicit inputs (the sample CLI path).
GeneratedAd generate_ad(const Trainer& tr, const data::ProductSpec& product,
                        const std::vector<pref::HistoryItem>& history, bool use_control,
                        model::GenMode mode, double temperature, Rng& rng);

}  // namespace adgen::run
