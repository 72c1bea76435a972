// SPDX-License-Identifier: Apache-2.0
#include "adgen/synthdata.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>

#include <json.hpp>

namespace adgen::data {

using nlohmann::json;

namespace {

const std::array<std::vector<std::string>, kNumCategories> kCategoryWords = {{
    {"chair", "seat", "cushion", "recline", "armrest", "stool", "bench", "sofa", "velvet",
     "leather", "ergonomic", "swivel", "padded", "lounge", "rocker", "backrest", "footrest",
     "upholstered"},
    {"lamp", "light", "shade", "bulb", "glow", "dimmer", "sconce", "lantern", "bright",
     "warmth", "bedside", "halogen", "filament", "brass", "torch", "nightlight", "luminous",
     "beam"},
    {"teapot", "kettle", "brew", "ceramic", "spout", "infuser", "porcelain", "steep", "mug",
     "saucer", "enamel", "stovetop", "whistle", "glaze", "loose", "leaf", "herbal", "chai"},
    {"bookshelf", "shelf", "ladder", "oak", "walnut", "cubby", "divider", "riser", "bracket",
     "storage", "tier", "rack", "display", "organizer", "modular", "corner", "tall", "wide"},
    {"lipstick", "gloss", "matte", "shimmer", "tint", "balm", "crimson", "rouge", "satin",
     "moisturizing", "pigment", "creamy", "longwear", "hydrating", "nude", "coral", "berry",
     "blush"},
    {"speaker", "bass", "stereo", "wireless", "bluetooth", "subwoofer", "treble", "audio",
     "surround", "amplifier", "woofer", "playback", "pairing", "battery", "volume", "clarity",
     "acoustic", "soundbar"},
    {"blanket", "throw", "fleece", "wool", "knit", "quilt", "weave", "plush", "snuggle",
     "thermal", "cotton", "flannel", "bedding", "drape", "sherpa", "fuzzy", "cable", "hem"},
    {"backpack", "strap", "zipper", "pocket", "buckle", "daypack", "hiking", "laptop", "pouch",
     "webbing", "canvas", "waterproof", "trek", "commute", "gear", "harness", "mesh", "duffel"},
}};

const std::vector<std::string> kStyleWords = {
    "premium", "soft",    "durable", "eco",     "modern",  "classic", "cozy",   "sleek",
    "vibrant", "minimal", "luxury",  "compact", "portable", "elegant", "sturdy", "fresh"};

const std::vector<std::string> kTemplateWords = {
    "product", "information", "description", "selling", "points", "task",      "generate",
    "an",      "advertising", "text",        "and",     "image",  "using",     "only",
    "words",   "from",        "the",         "provided", "generation", "content",
    "following", "style",     "create",      "advertisement", "for", "with",   "use"};

LexiconInfo build_lexicon() {
    LexiconInfo info;
    info.category_words = kCategoryWords;
    info.style_words = kStyleWords;
    for (const auto& cluster : kCategoryWords) {
        info.all.insert(info.all.end(), cluster.begin(), cluster.end());
    }
    info.all.insert(info.all.end(), kStyleWords.begin(), kStyleWords.end());
    info.all.insert(info.all.end(), kTemplateWords.begin(), kTemplateWords.end());
    return info;
}

std::atomic<size_t> g_history_reads{0};

// Distinct draws from a word pool, order preserved by draw order.
std::vector<std::string> draw_distinct(const std::vector<std::string>& pool, size_t count,
                                       Rng& rng) {
    std::vector<size_t> idx(pool.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<std::string> out;
    count = std::min(count, pool.size());
    for (size_t k = 0; k < count; ++k) {
        const size_t pick = k + static_cast<size_t>(rng.below(idx.size() - k));
        std::swap(idx[k], idx[pick]);
        out.push_back(pool[idx[k]]);
    }
    return out;
}

// Weighted sample without replacement from the selling points.
std::vector<std::string> sample_title(const std::vector<std::string>& selling_points,
                                      const std::vector<std::string>& preferred,
                                      double preferred_weight, Rng& rng) {
    const size_t want = std::min<size_t>(4 + rng.below(4), selling_points.size());
    std::vector<std::string> pool = selling_points;
    std::vector<double> w(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) {
        const bool pref =
            std::find(preferred.begin(), preferred.end(), pool[i]) != preferred.end();
        w[i] = pref ? preferred_weight : 1.0;
    }
    std::vector<std::string> out;
    while (out.size() < want) {
        const size_t pick = rng.weighted_pick(w);
        out.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        w.erase(w.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

std::vector<std::string> uniform_title(const std::vector<std::string>& selling_points,
                                       Rng& rng) {
    return draw_distinct(selling_points, std::min<size_t>(4 + rng.below(4),
                                                          selling_points.size()),
                         rng);
}

UserLatent gen_latent(Rng& rng) {
    UserLatent u;
    u.palette = random_palette(rng);
    u.keywords = draw_distinct(kStyleWords, 4, rng);
    u.modality_drive = rng.uniform(0.2, 0.8);
    return u;
}

json image_to_json(const tok::SyntheticImage& img) {
    json a = json::array();
    for (auto c : img.codes) a.push_back(static_cast<int>(c));
    return a;
}

std::array<std::uint8_t, 16> codes_from_json(const json& a, const char* field) {
    if (!a.is_array() || a.size() != 16) {
        throw FormatError(std::string("field '") + field + "' must be a 16-code array");
    }
    std::array<std::uint8_t, 16> out{};
    for (size_t i = 0; i < 16; ++i) {
        const int v = a[i].get<int>();
        if (v < 0 || v > 15) {
            throw FormatError(std::string("field '") + field + "' has code " +
                              std::to_string(v) + " outside [0,16)");
        }
        out[i] = static_cast<std::uint8_t>(v);
    }
    return out;
}

}  // namespace

const LexiconInfo& default_lexicon() {
    static const LexiconInfo info = build_lexicon();
    return info;
}

const std::vector<std::string>& default_templates() {
    static const std::vector<std::string> tmpls = {
        "product information description {} selling points {} task generate an advertising "
        "text and image using only words from the provided selling points generation content "
        "following the text style <text_ph> and the image style <image_ph>",
        "create an advertisement for description {} with selling points {} use only provided "
        "words generation content following the text style <text_ph> and the image style "
        "<image_ph>"};
    return tmpls;
}

const std::array<std::vector<size_t>, kNumShapes>& foreground_shapes() {
    static const std::array<std::vector<size_t>, kNumShapes> shapes = {{
        {5, 6, 9, 10},
        {1, 2, 5, 6, 9, 10},
        {4, 5, 6, 7, 8, 9, 10, 11},
        {5, 9, 13},
        {6, 9, 10, 11, 14},
        {1, 5, 6, 10, 11},
        {2, 5, 6, 7, 10},
        {8, 9, 12, 13},
    }};
    return shapes;
}

const std::vector<HistoryRecord>& UserRecord::history() const {
    g_history_reads.fetch_add(1, std::memory_order_relaxed);
    return history_;
}

size_t history_access_count() { return g_history_reads.load(std::memory_order_relaxed); }
void reset_history_access_count() { g_history_reads.store(0, std::memory_order_relaxed); }

void DatasetConfig::validate() const {
    if (n_train_users + n_test_users < 2) throw ConfigError("dataset: need at least 2 users");
    if (n_train_users == 0 || n_test_users == 0) {
        throw ConfigError("dataset: n_train_users and n_test_users must be >= 1");
    }
    if (m_hist == 0) throw ConfigError("dataset.m_hist must be >= 1");
    if (noise_fraction < 0.0 || noise_fraction >= 1.0) {
        throw ConfigError("dataset.noise_fraction must be in [0,1)");
    }
    if (oversample_weight < 1.0) throw ConfigError("dataset.oversample_weight must be >= 1");
}

std::array<std::uint8_t, 2> random_palette(Rng& rng) {
    const std::uint8_t a = static_cast<std::uint8_t>(rng.below(16));
    std::uint8_t b = static_cast<std::uint8_t>(rng.below(15));
    if (b >= a) ++b;
    return {a, b};
}

bool same_palette(const std::array<std::uint8_t, 2>& a, const std::array<std::uint8_t, 2>& b) {
    return (a[0] == b[0] && a[1] == b[1]) || (a[0] == b[1] && a[1] == b[0]);
}

tok::SyntheticImage transparent_image(const ProductSpec& p) {
    tok::SyntheticImage img;
    img.mask.emplace();
    img.mask->fill(false);
    for (size_t i : foreground_shapes()[p.shape]) {
        img.codes[i] = p.color;
        (*img.mask)[i] = true;
    }
    return img;
}

tok::SyntheticImage composite_image(const ProductSpec& p,
                                    const std::array<std::uint8_t, 2>& palette, Rng& rng) {
    tok::SyntheticImage img = transparent_image(p);
    for (size_t i = 0; i < tok::SyntheticImage::kPatches; ++i) {
        if (!(*img.mask)[i]) img.codes[i] = palette[rng.below(2)];
    }
    return img;
}

ProductSpec gen_product(size_t category, Rng& rng) {
    if (category >= kNumCategories) {
        throw ParamError("gen_product: category " + std::to_string(category) +
                         " outside [0," + std::to_string(kNumCategories) + ")");
    }
    const LexiconInfo& lex = default_lexicon();
    ProductSpec p;
    p.category = category;
    p.shape = static_cast<size_t>(rng.below(kNumShapes));
    p.color = static_cast<std::uint8_t>(rng.below(16));
    p.description = draw_distinct(lex.category_words[category], 4 + rng.below(5), rng);
    p.selling_points = draw_distinct(lex.category_words[category], 4 + rng.below(2), rng);
    auto style = draw_distinct(lex.style_words, 4 + rng.below(2), rng);
    p.selling_points.insert(p.selling_points.end(), style.begin(), style.end());
    return p;
}

GroundTruthAd render_ground_truth_ad(const ProductSpec& p, const UserLatent& user,
                                     double oversample_weight, Rng& rng) {
    GroundTruthAd ad;
    ad.image = composite_image(p, user.palette, rng);
    ad.title = sample_title(p.selling_points, user.keywords, oversample_weight, rng);
    return ad;
}

std::vector<HistoryRecord> gen_history(const UserLatent& user, size_t target_category,
                                       size_t m_hist, double noise_fraction,
                                       double oversample_weight, Rng& rng) {
    if (noise_fraction < 0.0 || noise_fraction >= 1.0) {
        throw ParamError("gen_history: noise_fraction must be in [0,1)");
    }
    const size_t n_noise = static_cast<size_t>(
        std::llround(noise_fraction * static_cast<double>(m_hist)));
    std::vector<bool> is_noise(m_hist, false);
    for (size_t i = 0; i < n_noise; ++i) is_noise[i] = true;
    // Fisher-Yates with the record rng keeps placement deterministic.
    for (size_t i = m_hist; i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.below(i));
        std::swap(is_noise[i - 1], is_noise[j]);
    }

    std::vector<HistoryRecord> out;
    out.reserve(m_hist);
    for (size_t i = 0; i < m_hist; ++i) {
        HistoryRecord rec;
        rec.is_noise = is_noise[i];
        if (rec.is_noise) {
            // Unrelated category, random style in both modalities.
            size_t cat = static_cast<size_t>(rng.below(kNumCategories - 1));
            if (cat >= target_category) ++cat;
            ProductSpec p = gen_product(cat, rng);
            rec.item.image = composite_image(p, random_palette(rng), rng);
            rec.item.text = uniform_title(p.selling_points, rng);
            rec.item.product_text = p.description;
        } else {
            ProductSpec p = gen_product(target_category, rng);
            const bool image_driven = rng.uniform() < user.modality_drive;
            if (image_driven) {
                // The image carries the preference; the title is modal noise.
                rec.item.image = composite_image(p, user.palette, rng);
                rec.item.text = uniform_title(p.selling_points, rng);
            } else {
                rec.item.image = composite_image(p, random_palette(rng), rng);
                rec.item.text =
                    sample_title(p.selling_points, user.keywords, oversample_weight, rng);
            }
            rec.item.product_text = p.description;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

DatasetSplit gen_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    DatasetSplit split;
    const Rng master(seed);
    const size_t total = cfg.n_train_users + cfg.n_test_users;
    for (std::uint64_t uid = 0; uid < total; ++uid) {
        Rng rng = master.child("user", uid);
        UserRecord rec;
        rec.user_id = uid;
        rec.split = uid < cfg.n_train_users ? "train" : "test";
        rec.latent = gen_latent(rng);
        rec.target = gen_product(static_cast<size_t>(rng.below(kNumCategories)), rng);
        GroundTruthAd ad = render_ground_truth_ad(rec.target, rec.latent,
                                                  cfg.oversample_weight, rng);
        rec.gt_image = ad.image;
        rec.gt_title = ad.title;
        rec.mutable_history() = gen_history(rec.latent, rec.target.category, cfg.m_hist,
                                            cfg.noise_fraction, cfg.oversample_weight, rng);
        (uid < cfg.n_train_users ? split.train : split.test).push_back(std::move(rec));
    }
    return split;
}

std::string to_jsonl(const DatasetSplit& split) {
    std::string out;
    auto emit = [&out](const UserRecord& rec) {
        json j;
        j["format_version"] = kFormatVersion;
        j["user_id"] = rec.user_id;
        j["split"] = rec.split;
        j["latent"] = {{"palette", {rec.latent.palette[0], rec.latent.palette[1]}},
                       {"keywords", rec.latent.keywords},
                       {"modality_drive", rec.latent.modality_drive}};
        j["target_product"] = {{"category", rec.target.category},
                               {"shape", rec.target.shape},
                               {"color", rec.target.color},
                               {"description", rec.target.description},
                               {"selling_points", rec.target.selling_points}};
        j["gt_image_codes"] = image_to_json(rec.gt_image);
        j["gt_title"] = rec.gt_title;
        json hist = json::array();
        for (const HistoryRecord& h : rec.history()) {
            hist.push_back({{"image_codes", image_to_json(h.item.image)},
                            {"title", h.item.text},
                            {"product_text", h.item.product_text},
                            {"is_noise", h.is_noise}});
        }
        j["history"] = std::move(hist);
        out += j.dump();
        out += '\n';
    };
    for (const UserRecord& r : split.train) emit(r);
    for (const UserRecord& r : split.test) emit(r);
    return out;
}

DatasetSplit from_jsonl(const std::string& contents) {
    DatasetSplit split;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos < contents.size()) {
        size_t end = contents.find('\n', pos);
        if (end == std::string::npos) end = contents.size();
        const std::string line = contents.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("format_version")) {
            throw FormatError("dataset line " + std::to_string(line_no) +
                              ": missing format_version");
        }
        if (j["format_version"].get<int>() != kFormatVersion) {
            throw FormatError("dataset line " + std::to_string(line_no) +
                              ": unsupported format_version " +
                              std::to_string(j["format_version"].get<int>()));
        }
        UserRecord rec;
        rec.user_id = j.at("user_id").get<std::uint64_t>();
        rec.split = j.at("split").get<std::string>();
        const json& lat = j.at("latent");
        rec.latent.palette[0] = static_cast<std::uint8_t>(lat.at("palette").at(0).get<int>());
        rec.latent.palette[1] = static_cast<std::uint8_t>(lat.at("palette").at(1).get<int>());
        rec.latent.keywords = lat.at("keywords").get<std::vector<std::string>>();
        rec.latent.modality_drive = lat.at("modality_drive").get<double>();
        const json& tp = j.at("target_product");
        rec.target.category = tp.at("category").get<size_t>();
        rec.target.shape = tp.at("shape").get<size_t>();
        rec.target.color = static_cast<std::uint8_t>(tp.at("color").get<int>());
        rec.target.description = tp.at("description").get<std::vector<std::string>>();
        rec.target.selling_points = tp.at("selling_points").get<std::vector<std::string>>();
        rec.gt_image.codes = codes_from_json(j.at("gt_image_codes"), "gt_image_codes");
        if (rec.target.shape < kNumShapes) {
            rec.gt_image.mask.emplace();
            rec.gt_image.mask->fill(false);
            for (size_t i : foreground_shapes()[rec.target.shape]) (*rec.gt_image.mask)[i] = true;
        }
        rec.gt_title = j.at("gt_title").get<std::vector<std::string>>();
        for (const json& h : j.at("history")) {
            HistoryRecord hr;
            hr.item.image.codes = codes_from_json(h.at("image_codes"), "history.image_codes");
            hr.item.text = h.at("title").get<std::vector<std::string>>();
            hr.item.product_text = h.at("product_text").get<std::vector<std::string>>();
            hr.is_noise = h.at("is_noise").get<bool>();
            rec.mutable_history().push_back(std::move(hr));
        }
        if (rec.split == "train") {
            split.train.push_back(std::move(rec));
        } else if (rec.split == "test") {
            split.test.push_back(std::move(rec));
        } else {
            throw FormatError("dataset line " + std::to_string(line_no) + ": bad split '" +
                              rec.split + "'");
        }
    }
    return split;
}

namespace {
void validate_record(const UserRecord& rec, const std::set<std::string>& lexicon) {
    const std::string where = "user " + std::to_string(rec.user_id) + ": ";
    if (rec.latent.palette[0] == rec.latent.palette[1]) {
        throw FormatError(where + "palette codes must be distinct");
    }
    if (rec.latent.keywords.size() != 4) throw FormatError(where + "need 4 keywords");
    if (rec.latent.modality_drive < 0 || rec.latent.modality_drive > 1) {
        throw FormatError(where + "modality_drive outside [0,1]");
    }
    if (rec.target.category >= kNumCategories) throw FormatError(where + "bad category");
    if (rec.target.shape >= kNumShapes) throw FormatError(where + "bad shape");
    const size_t fg = foreground_shapes()[rec.target.shape].size();
    if (fg < 3 || fg > 8) throw FormatError(where + "foreground must cover 3-8 patches");
    if (rec.target.description.size() < 4 || rec.target.description.size() > 8) {
        throw FormatError(where + "description must be 4-8 words");
    }
    if (rec.target.selling_points.size() < 6 || rec.target.selling_points.size() > 10) {
        throw FormatError(where + "selling points must be 6-10 words");
    }
    for (const auto& w : rec.target.description) {
        if (!lexicon.count(w)) throw FormatError(where + "description word '" + w +
                                                 "' not in lexicon");
    }
    for (const auto& w : rec.target.selling_points) {
        if (!lexicon.count(w)) throw FormatError(where + "selling point '" + w +
                                                 "' not in lexicon");
    }
    if (rec.gt_title.empty()) throw FormatError(where + "empty gt_title");
    for (const auto& w : rec.gt_title) {
        if (std::find(rec.target.selling_points.begin(), rec.target.selling_points.end(), w) ==
            rec.target.selling_points.end()) {
            throw FormatError(where + "gt_title word '" + w + "' not in selling points");
        }
    }
    if (rec.gt_image.mask) {
        const size_t n = rec.gt_image.foreground_count();
        if (n < 1 || n > 12) throw FormatError(where + "mask outside [1,12] patches");
        // Foreground patches of the GT image must carry the product color.
        for (size_t i : foreground_shapes()[rec.target.shape]) {
            if (rec.gt_image.codes[i] != rec.target.color) {
                throw FormatError(where + "gt image foreground does not match product color");
            }
        }
    }
    for (const HistoryRecord& h : rec.history()) {
        if (h.item.text.empty()) throw FormatError(where + "history item with empty text");
        if (h.item.product_text.empty()) {
            throw FormatError(where + "history item with empty product text");
        }
    }
}
}  // namespace

void validate_dataset(const DatasetSplit& split) {
    std::set<std::string> lexicon(default_lexicon().all.begin(), default_lexicon().all.end());
    std::set<std::uint64_t> train_ids, test_ids;
    for (const UserRecord& r : split.train) {
        if (r.split != "train") throw FormatError("record in train list with split != train");
        if (!train_ids.insert(r.user_id).second) {
            throw FormatError("duplicate train user id " + std::to_string(r.user_id));
        }
        validate_record(r, lexicon);
    }
    for (const UserRecord& r : split.test) {
        if (r.split != "test") throw FormatError("record in test list with split != test");
        if (!test_ids.insert(r.user_id).second) {
            throw FormatError("duplicate test user id " + std::to_string(r.user_id));
        }
        if (train_ids.count(r.user_id)) {
            throw FormatError("user id " + std::to_string(r.user_id) +
                              " appears in both splits");
        }
        validate_record(r, lexicon);
    }
}

std::vector<PbsPair> gen_pbs_pairs(size_t n, Rng& rng) {
    std::vector<PbsPair> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        ProductSpec p = gen_product(static_cast<size_t>(rng.below(kNumCategories)), rng);
        auto pal_a = random_palette(rng);
        auto pal_b = random_palette(rng);
        while (same_palette(pal_a, pal_b)) pal_b = random_palette(rng);
        PbsPair pair;
        pair.a = composite_image(p, pal_a, rng);
        pair.b = composite_image(p, pal_b, rng);
        out.push_back(std::move(pair));
    }
    return out;
}

}  // namespace adgen::data
