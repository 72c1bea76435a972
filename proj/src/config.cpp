// SPDX-License-Identifier: Apache-2.0
#include "adgen/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace adgen {

using nlohmann::json;

const char* mode_name(AblationMode m) {
    switch (m) {
        case AblationMode::kBaseline: return "baseline";
        case AblationMode::kWithHistory: return "with_history";
        case AblationMode::kWithPss: return "with_pss";
        case AblationMode::kFull: return "full";
    }
    return "?";
}

AblationMode mode_from_name(const std::string& s) {
    if (s == "baseline") return AblationMode::kBaseline;
    if (s == "with_history") return AblationMode::kWithHistory;
    if (s == "with_pss") return AblationMode::kWithPss;
    if (s == "full") return AblationMode::kFull;
    throw ConfigError("mode must be one of baseline|with_history|with_pss|full, got '" + s +
                      "'");
}

const char* strategy_name(SamplingStrategy s) {
    switch (s) {
        case SamplingStrategy::kProductSimilarity: return "product_similarity";
        case SamplingStrategy::kRandom: return "random";
        case SamplingStrategy::kMostSimilar: return "most_similar";
    }
    return "?";
}

SamplingStrategy strategy_from_name(const std::string& s) {
    if (s == "product_similarity") return SamplingStrategy::kProductSimilarity;
    if (s == "random") return SamplingStrategy::kRandom;
    if (s == "most_similar") return SamplingStrategy::kMostSimilar;
    throw ConfigError("strategy must be one of product_similarity|random|most_similar, got '" +
                      s + "'");
}

void PreferenceConfig::validate() const {
    if (n_sample < 1) throw ConfigError("preference.n_sample must be >= 1");
    if (keep_ratio <= 0.0 || keep_ratio > 1.0) {
        throw ConfigError("preference.keep_ratio must be in (0,1]");
    }
    if (epsilon < 0) throw ConfigError("preference.epsilon must be >= 0");
    if (tau_start <= 0 || tau_end <= 0) {
        throw ConfigError("preference.tau_start and tau_end must be > 0");
    }
}

void TrainingConfig::validate() const {
    if (steps < 1) throw ConfigError("training.steps must be >= 1");
    if (batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
    if (lr < 0) throw ConfigError("training.lr must be >= 0");
    if (weight_decay < 0) throw ConfigError("training.weight_decay must be >= 0");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw ConfigError("training.beta1/beta2 must be in [0,1)");
    }
    if (adam_eps <= 0) throw ConfigError("training.adam_eps must be > 0");
    if (checkpoint_every < 1) throw ConfigError("training.checkpoint_every must be >= 1");
    if (pbs_pairs < 64) throw ConfigError("training.pbs_pairs must be >= 64");
}

void EvalConfig::validate() const {
    if (max_text_words < 1 || max_text_words > 24) {
        throw ConfigError("eval.max_text_words must be in [1,24]");
    }
}

void AblateConfig::validate() const {
    if (seeds.empty()) throw ConfigError("ablate.seeds must be nonempty");
    if (history_lengths.empty()) throw ConfigError("ablate.history_lengths must be nonempty");
    for (const std::string& s : strategies) strategy_from_name(s);
}

void RunConfig::finalize() {
    model.vocab_size = data::default_lexicon().all.size() + tok::ImageCodebook::kCodes +
                       tok::Vocab::kNumSpecials;
    validate();
}

void RunConfig::validate() const {
    model.validate();
    preference.validate();
    dataset.validate();
    training.validate();
    pbs.validate();
    eval.validate();
    ablate.validate();
    if (preference.n_sample > dataset.m_hist) {
        throw ConfigError("preference.n_sample cannot exceed dataset.m_hist");
    }
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown config key '" + where + (where.empty() ? "" : ".") +
                              key + "'");
        }
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["mode"] = mode_name(mode);
    j["strategy"] = strategy_name(strategy);
    j["template_file"] = template_file;
    j["model"] = {{"d_model", model.d_model},
                  {"n_layers", model.n_layers},
                  {"n_heads", model.n_heads},
                  {"max_seq_len", model.max_seq_len},
                  {"inject_every", model.inject_every},
                  {"inject_offset", model.inject_offset},
                  {"lambda_text", model.lambda_text},
                  {"lambda_img", model.lambda_img},
                  {"ffn_mult", model.ffn_mult}};
    j["preference"] = {{"n_sample", preference.n_sample},
                       {"keep_ratio", preference.keep_ratio},
                       {"epsilon", preference.epsilon},
                       {"tau_start", preference.tau_start},
                       {"tau_end", preference.tau_end}};
    j["dataset"] = {{"n_train_users", dataset.n_train_users},
                    {"n_test_users", dataset.n_test_users},
                    {"m_hist", dataset.m_hist},
                    {"noise_fraction", dataset.noise_fraction},
                    {"oversample_weight", dataset.oversample_weight}};
    j["training"] = {{"steps", training.steps},
                     {"batch_size", training.batch_size},
                     {"lr", training.lr},
                     {"weight_decay", training.weight_decay},
                     {"beta1", training.beta1},
                     {"beta2", training.beta2},
                     {"adam_eps", training.adam_eps},
                     {"checkpoint_every", training.checkpoint_every},
                     {"pbs_steps", training.pbs_steps},
                     {"pbs_pairs", training.pbs_pairs}};
    j["pbs"] = {{"width", pbs.width},
                {"n_heads", pbs.n_heads},
                {"temperature", pbs.temperature},
                {"batch", pbs.batch},
                {"lr", pbs.lr},
                {"dropout_patches", pbs.dropout_patches}};
    j["eval"] = {{"max_text_words", eval.max_text_words},
                 {"max_eval_users", eval.max_eval_users}};
    j["ablate"] = {{"seeds", ablate.seeds},
                   {"history_lengths", ablate.history_lengths},
                   {"strategies", ablate.strategies}};
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    check_keys(j, {"seed", "mode", "strategy", "template_file", "model", "preference",
                   "dataset", "training", "pbs", "eval", "ablate"},
               "");
    RunConfig c;
    read(j, "seed", c.seed);
    if (j.contains("mode")) c.mode = mode_from_name(j.at("mode").get<std::string>());
    if (j.contains("strategy")) {
        c.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    }
    read(j, "template_file", c.template_file);
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, {"d_model", "n_layers", "n_heads", "max_seq_len", "inject_every",
                       "inject_offset", "lambda_text", "lambda_img", "ffn_mult"},
                   "model");
        read(m, "d_model", c.model.d_model);
        read(m, "n_layers", c.model.n_layers);
        read(m, "n_heads", c.model.n_heads);
        read(m, "max_seq_len", c.model.max_seq_len);
        read(m, "inject_every", c.model.inject_every);
        read(m, "inject_offset", c.model.inject_offset);
        read(m, "lambda_text", c.model.lambda_text);
        read(m, "lambda_img", c.model.lambda_img);
        read(m, "ffn_mult", c.model.ffn_mult);
    }
    if (j.contains("preference")) {
        const json& p = j.at("preference");
        check_keys(p, {"n_sample", "keep_ratio", "epsilon", "tau_start", "tau_end"},
                   "preference");
        read(p, "n_sample", c.preference.n_sample);
        read(p, "keep_ratio", c.preference.keep_ratio);
        read(p, "epsilon", c.preference.epsilon);
        read(p, "tau_start", c.preference.tau_start);
        read(p, "tau_end", c.preference.tau_end);
    }
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, {"n_train_users", "n_test_users", "m_hist", "noise_fraction",
                       "oversample_weight"},
                   "dataset");
        read(d, "n_train_users", c.dataset.n_train_users);
        read(d, "n_test_users", c.dataset.n_test_users);
        read(d, "m_hist", c.dataset.m_hist);
        read(d, "noise_fraction", c.dataset.noise_fraction);
        read(d, "oversample_weight", c.dataset.oversample_weight);
    }
    if (j.contains("training")) {
        const json& t = j.at("training");
        check_keys(t, {"steps", "batch_size", "lr", "weight_decay", "beta1", "beta2",
                       "adam_eps", "checkpoint_every", "pbs_steps", "pbs_pairs"},
                   "training");
        read(t, "steps", c.training.steps);
        read(t, "batch_size", c.training.batch_size);
        read(t, "lr", c.training.lr);
        read(t, "weight_decay", c.training.weight_decay);
        read(t, "beta1", c.training.beta1);
        read(t, "beta2", c.training.beta2);
        read(t, "adam_eps", c.training.adam_eps);
        read(t, "checkpoint_every", c.training.checkpoint_every);
        read(t, "pbs_steps", c.training.pbs_steps);
        read(t, "pbs_pairs", c.training.pbs_pairs);
    }
    if (j.contains("pbs")) {
        const json& p = j.at("pbs");
        check_keys(p, {"width", "n_heads", "temperature", "batch", "lr", "dropout_patches"},
                   "pbs");
        read(p, "width", c.pbs.width);
        read(p, "n_heads", c.pbs.n_heads);
        read(p, "temperature", c.pbs.temperature);
        read(p, "batch", c.pbs.batch);
        read(p, "lr", c.pbs.lr);
        read(p, "dropout_patches", c.pbs.dropout_patches);
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        check_keys(e, {"max_text_words", "max_eval_users"}, "eval");
        read(e, "max_text_words", c.eval.max_text_words);
        read(e, "max_eval_users", c.eval.max_eval_users);
    }
    if (j.contains("ablate")) {
        const json& a = j.at("ablate");
        check_keys(a, {"seeds", "history_lengths", "strategies"}, "ablate");
        read(a, "seeds", c.ablate.seeds);
        read(a, "history_lengths", c.ablate.history_lengths);
        read(a, "strategies", c.ablate.strategies);
    }
    c.finalize();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return from_json(j);
}

}  // namespace adgen
