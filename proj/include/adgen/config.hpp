// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "adgen/model.hpp"
#include "adgen/pbs.hpp"
#include "adgen/synthdata.hpp"

namespace adgen {

enum class AblationMode { kBaseline, kWithHistory, kWithPss, kFull };
enum class SamplingStrategy { kProductSimilarity, kRandom, kMostSimilar };

const char* mode_name(AblationMode m);
AblationMode mode_from_name(const std::string& s);
const char* strategy_name(SamplingStrategy s);
SamplingStrategy strategy_from_name(const std::string& s);

struct PreferenceConfig {
    size_t n_sample = 10;       // top-N behaviors
    double keep_ratio = 0.4;    // top-40% tokens
    double epsilon = 1e-6;      // importance-weight floor
    double tau_start = 1.0;     // Gumbel temperature schedule
    double tau_end = 0.3;
    void validate() const;
};

struct TrainingConfig {
    size_t steps = 500;
    size_t batch_size = 4;
    double lr = 3e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    size_t checkpoint_every = 100;
    size_t pbs_steps = 500;
    size_t pbs_pairs = 1000;
    void validate() const;
};

struct EvalConfig {
    size_t max_text_words = 24;
    size_t max_eval_users = 0;  // 0 = all test users
    void validate() const;
};

struct AblateConfig {
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::vector<size_t> history_lengths = {0, 3, 5, 8, 10, 12};
    std::vector<std::string> strategies = {"random", "most_similar", "product_similarity"};
    void validate() const;
};

struct RunConfig {
    std::uint64_t seed = 1;
    AblationMode mode = AblationMode::kFull;
    SamplingStrategy strategy = SamplingStrategy::kProductSimilarity;
    std::string template_file;  // empty = built-in templates
    model::ModelConfig model;   // vocab_size derived from the lexicon
    PreferenceConfig preference;
    data::DatasetConfig dataset;
    TrainingConfig training;
    eval::PbsConfig pbs;
    EvalConfig eval;
    AblateConfig ablate;

    // Fills derived fields (vocab_size) and validates everything.
    void finalize();
    void validate() const;

    nlohmann::json to_json() const;
    // Strict: unknown keys anywhere are rejected with the offending path.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
};

}  // namespace adgen
