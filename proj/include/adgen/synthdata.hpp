// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "adgen/preference.hpp"
#include "adgen/rng.hpp"
#include "adgen/tokenizer.hpp"

namespace adgen::data {

constexpr size_t kNumCategories = 8;
constexpr size_t kNumShapes = 8;
constexpr int kFormatVersion = 1;

// Closed synthetic lexicon: eight category clusters, a shared style-keyword
// pool, and the instruction-template words.
struct LexiconInfo {
    std::vector<std::string> all;  // ordered; backs the Vocab
    std::array<std::vector<std::string>, kNumCategories> category_words;
    std::vector<std::string> style_words;
};
const LexiconInfo& default_lexicon();

// Built-in instruction templates (see tokenizer template syntax). Both end
// with the style-constraint clause carrying the two placeholders.
const std::vector<std::string>& default_templates();

// Foreground patch patterns. None of them covers patch 0: the first image
// token is predicted before any control has entered the sequence, so the
// copy task stays well-posed with centered foregrounds.
const std::array<std::vector<size_t>, kNumShapes>& foreground_shapes();

struct UserLatent {
    std::array<std::uint8_t, 2> palette;     // preferred background codes
    std::vector<std::string> keywords;       // 4 preferred style words
    double modality_drive = 0.5;             // P(historical click was image-driven)
};

struct ProductSpec {
    size_t category = 0;
    size_t shape = 0;
    std::uint8_t color = 0;                  // foreground color code
    std::vector<std::string> description;    // 4-8 lexicon words
    std::vector<std::string> selling_points; // 6-10 lexicon words
};

// Foreground patches carry the product color; background patches carry the
// reserved transparent marker (mask=false, code 0).
tok::SyntheticImage transparent_image(const ProductSpec& p);

// Foreground composited over per-patch draws from the palette.
tok::SyntheticImage composite_image(const ProductSpec& p,
                                    const std::array<std::uint8_t, 2>& palette, Rng& rng);

struct HistoryRecord {
    pref::HistoryItem item;
    bool is_noise = false;
};

class UserRecord {
  public:
    std::uint64_t user_id = 0;
    std::string split;  // "train" | "test"
    UserLatent latent;
    ProductSpec target;
    tok::SyntheticImage gt_image;
    std::vector<std::string> gt_title;

    // History reads are counted so the baseline training mode can be shown
    // to never touch them.
    const std::vector<HistoryRecord>& history() const;
    std::vector<HistoryRecord>& mutable_history() { return history_; }
    size_t history_size_unobserved() const { return history_.size(); }

  private:
    std::vector<HistoryRecord> history_;
};

size_t history_access_count();
void reset_history_access_count();

struct DatasetConfig {
    size_t n_train_users = 1000;
    size_t n_test_users = 200;
    size_t m_hist = 30;
    double noise_fraction = 0.3;
    double oversample_weight = 3.0;  // preferred-keyword weight in titles
    void validate() const;
};

struct DatasetSplit {
    std::vector<UserRecord> train;
    std::vector<UserRecord> test;
};

ProductSpec gen_product(size_t category, Rng& rng);

// GT ad: background drawn from the user's preferred palette, title words
// sampled from the selling points with preferred keywords oversampled.
struct GroundTruthAd {
    tok::SyntheticImage image;
    std::vector<std::string> title;
};
GroundTruthAd render_ground_truth_ad(const ProductSpec& p, const UserLatent& user,
                                     double oversample_weight, Rng& rng);

// (1 - noise_fraction) related items rendered per the user's latent (the
// modality drive decides which modality carries the preference; the other is
// randomized), noise_fraction unrelated items; exactly round(f*M) noise.
std::vector<HistoryRecord> gen_history(const UserLatent& user, size_t target_category,
                                       size_t m_hist, double noise_fraction,
                                       double oversample_weight, Rng& rng);

DatasetSplit gen_dataset(const DatasetConfig& cfg, std::uint64_t seed);

// JSONL: one self-describing user record per line with a format_version field.
std::string to_jsonl(const DatasetSplit& split);
DatasetSplit from_jsonl(const std::string& contents);

// Checks every structural invariant; throws FormatError naming the record
// and field on the first violation.
void validate_dataset(const DatasetSplit& split);

// Training pairs for the background-similarity metric: same foreground,
// different background palettes.
struct PbsPair {
    tok::SyntheticImage a;
    tok::SyntheticImage b;
};
std::vector<PbsPair> gen_pbs_pairs(size_t n, Rng& rng);

// Two distinct palettes (as sets).
std::array<std::uint8_t, 2> random_palette(Rng& rng);
bool same_palette(const std::array<std::uint8_t, 2>& a, const std::array<std::uint8_t, 2>& b);

}  // namespace adgen::data
