// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "adgen/synthdata.hpp"

using namespace adgen;
using namespace adgen::data;

TEST_CASE("lexicon is well-formed and fits the vocab budget") {
    const LexiconInfo& lex = default_lexicon();
    CHECK(lex.all.size() <= 256);
    std::set<std::string> uniq(lex.all.begin(), lex.all.end());
    CHECK(uniq.size() == lex.all.size());
    // The Vocab constructor enforces the lowercase/size constraints.
    CHECK_NOTHROW(tok::Vocab{lex.all});
    // Template words must all tokenize.
    tok::Vocab vocab(lex.all);
    for (const std::string& tmpl : default_templates()) {
        CHECK_NOTHROW(tok::render_instruction(tmpl, {"chair"}, {"soft"}, vocab));
    }
}

TEST_CASE("foreground shapes avoid patch 0 and cover 3-8 patches") {
    for (const auto& shape : foreground_shapes()) {
        CHECK(shape.size() >= 3);
        CHECK(shape.size() <= 8);
        for (size_t i : shape) {
            CHECK(i >= 1);
            CHECK(i < 16);
        }
    }
}

TEST_CASE("gen_product") {
    Rng rng(3);

    SUBCASE("foreground patch count within [3,8] over many draws") {
        for (int rep = 0; rep < 10000; ++rep) {
            ProductSpec p = gen_product(rng.below(kNumCategories), rng);
            tok::SyntheticImage img = transparent_image(p);
            const size_t n = img.foreground_count();
            CHECK(n >= 3);
            CHECK(n <= 8);
        }
    }

    SUBCASE("same seed gives an identical product") {
        Rng a(42), b(42);
        ProductSpec pa = gen_product(2, a);
        ProductSpec pb = gen_product(2, b);
        CHECK(pa.shape == pb.shape);
        CHECK(pa.color == pb.color);
        CHECK(pa.description == pb.description);
        CHECK(pa.selling_points == pb.selling_points);
    }

    SUBCASE("description words come from the lexicon") {
        const auto& lex = default_lexicon();
        std::set<std::string> all(lex.all.begin(), lex.all.end());
        for (int rep = 0; rep < 100; ++rep) {
            ProductSpec p = gen_product(rng.below(kNumCategories), rng);
            for (const auto& w : p.description) CHECK(all.count(w) == 1);
            for (const auto& w : p.selling_points) CHECK(all.count(w) == 1);
            CHECK(p.description.size() >= 4);
            CHECK(p.description.size() <= 8);
            CHECK(p.selling_points.size() >= 6);
            CHECK(p.selling_points.size() <= 10);
        }
        CHECK_THROWS_AS(gen_product(kNumCategories, rng), ParamError);
    }
}

TEST_CASE("render_ground_truth_ad") {
    Rng rng(11);

    SUBCASE("background patches use only the user's two preferred codes") {
        for (int rep = 0; rep < 200; ++rep) {
            UserLatent user;
            user.palette = random_palette(rng);
            user.keywords = {"premium", "soft", "cozy", "sleek"};
            user.modality_drive = 0.5;
            ProductSpec p = gen_product(rng.below(kNumCategories), rng);
            GroundTruthAd ad = render_ground_truth_ad(p, user, 3.0, rng);
            REQUIRE(ad.image.mask.has_value());
            for (size_t i = 0; i < 16; ++i) {
                if ((*ad.image.mask)[i]) {
                    CHECK(ad.image.codes[i] == p.color);
                } else {
                    const bool in_palette = ad.image.codes[i] == user.palette[0] ||
                                            ad.image.codes[i] == user.palette[1];
                    CHECK(in_palette);
                }
            }
            // Title always draws from the selling points.
            for (const auto& w : ad.title) {
                CHECK(std::find(p.selling_points.begin(), p.selling_points.end(), w) !=
                      p.selling_points.end());
            }
        }
    }

    SUBCASE("most titles contain a preferred keyword (oversampling weight 3)") {
        int hits = 0;
        const int draws = 10000;
        for (int rep = 0; rep < draws; ++rep) {
            UserLatent user;
            user.palette = random_palette(rng);
            user.keywords = {default_lexicon().style_words[rng.below(16)],
                             default_lexicon().style_words[rng.below(16)],
                             default_lexicon().style_words[rng.below(16)],
                             default_lexicon().style_words[rng.below(16)]};
            ProductSpec p = gen_product(rng.below(kNumCategories), rng);
            GroundTruthAd ad = render_ground_truth_ad(p, user, 3.0, rng);
            bool hit = false;
            for (const auto& w : ad.title) {
                hit |= std::find(user.keywords.begin(), user.keywords.end(), w) !=
                       user.keywords.end();
            }
            hits += hit;
        }
        CHECK(hits >= draws * 60 / 100);
    }
}

TEST_CASE("gen_history") {
    Rng rng(7);
    UserLatent user;
    user.palette = {3, 12};
    user.keywords = {"premium", "eco", "minimal", "fresh"};
    user.modality_drive = 0.5;

    SUBCASE("noise_fraction=0 gives all related items") {
        auto hist = gen_history(user, 2, 30, 0.0, 3.0, rng);
        for (const auto& h : hist) CHECK_FALSE(h.is_noise);
    }

    SUBCASE("bookkeeping records exactly round(0.3*30)=9 noise items") {
        for (int rep = 0; rep < 20; ++rep) {
            auto hist = gen_history(user, 2, 30, 0.3, 3.0, rng);
            size_t noise = 0;
            for (const auto& h : hist) noise += h.is_noise;
            CHECK(noise == 9);
            CHECK(hist.size() == 30);
        }
    }

    SUBCASE("noise items score lower product similarity than related items") {
        double related_sum = 0, noise_sum = 0;
        size_t related_n = 0, noise_n = 0;
        for (int u = 0; u < 1000; ++u) {
            UserLatent lu;
            lu.palette = random_palette(rng);
            lu.keywords = {"premium", "eco", "minimal", "fresh"};
            lu.modality_drive = rng.uniform(0.2, 0.8);
            const size_t cat = rng.below(kNumCategories);
            ProductSpec target = gen_product(cat, rng);
            auto hist = gen_history(lu, cat, 30, 0.3, 3.0, rng);
            for (const auto& h : hist) {
                const double s =
                    pref::cosine_bag_similarity(h.item.product_text, target.description);
                if (h.is_noise) {
                    noise_sum += s;
                    ++noise_n;
                } else {
                    related_sum += s;
                    ++related_n;
                }
            }
        }
        const double related_mean = related_sum / (double)related_n;
        const double noise_mean = noise_sum / (double)noise_n;
        CHECK(related_mean > noise_mean);
        // Separation invariant: at least 0.2 cosine between the groups.
        CHECK(related_mean - noise_mean >= 0.2);
    }
}

TEST_CASE("gen_dataset determinism and invariants") {
    DatasetConfig cfg;
    cfg.n_train_users = 30;
    cfg.n_test_users = 8;

    SUBCASE("same seed gives byte-identical files") {
        DatasetSplit a = gen_dataset(cfg, 5);
        DatasetSplit b = gen_dataset(cfg, 5);
        CHECK(to_jsonl(a) == to_jsonl(b));
        DatasetSplit c = gen_dataset(cfg, 6);
        CHECK(to_jsonl(a) != to_jsonl(c));
    }

    SUBCASE("round trip through jsonl preserves bytes") {
        DatasetSplit a = gen_dataset(cfg, 9);
        const std::string ser = to_jsonl(a);
        DatasetSplit b = from_jsonl(ser);
        CHECK(to_jsonl(b) == ser);
        CHECK(b.train.size() == cfg.n_train_users);
        CHECK(b.test.size() == cfg.n_test_users);
    }

    SUBCASE("validator passes every generated record") {
        DatasetSplit a = gen_dataset(cfg, 13);
        CHECK_NOTHROW(validate_dataset(a));
    }

    SUBCASE("validator rejects corrupted records") {
        DatasetSplit a = gen_dataset(cfg, 13);
        a.train[0].gt_title = {"plutonium"};
        CHECK_THROWS_AS(validate_dataset(a), FormatError);
        DatasetSplit b = gen_dataset(cfg, 13);
        b.test[0].user_id = b.train[0].user_id;
        CHECK_THROWS_AS(validate_dataset(b), FormatError);
    }

    SUBCASE("format_version is mandatory and checked") {
        CHECK_THROWS_AS(from_jsonl("{\"user_id\":0}\n"), FormatError);
        CHECK_THROWS_AS(from_jsonl("{\"format_version\":99}\n"), FormatError);
        CHECK_THROWS_AS(from_jsonl("not json\n"), FormatError);
    }
}

TEST_CASE("planted preference is recoverable by a latent-aware oracle") {
    DatasetConfig cfg;
    cfg.n_train_users = 200;
    cfg.n_test_users = 2;
    DatasetSplit ds = gen_dataset(cfg, 21);
    Rng rng(5);

    double oracle_palette = 0, random_palette_score = 0;
    double oracle_recall = 0, random_recall = 0;
    for (const UserRecord& r : ds.train) {
        // Background-palette match on GT backgrounds.
        size_t bg = 0, oracle_hit = 0, random_hit = 0;
        auto rand_pal = random_palette(rng);
        for (size_t i = 0; i < 16; ++i) {
            if ((*r.gt_image.mask)[i]) continue;
            ++bg;
            const auto c = r.gt_image.codes[i];
            oracle_hit += (c == r.latent.palette[0] || c == r.latent.palette[1]);
            random_hit += (c == rand_pal[0] || c == rand_pal[1]);
        }
        oracle_palette += (double)oracle_hit / (double)bg;
        random_palette_score += (double)random_hit / (double)bg;

        // Keyword recall on GT titles.
        auto rand_kw = std::vector<std::string>{
            default_lexicon().style_words[rng.below(16)],
            default_lexicon().style_words[rng.below(16)],
            default_lexicon().style_words[rng.below(16)],
            default_lexicon().style_words[rng.below(16)]};
        size_t style_words_in_title = 0, oracle_kw = 0, random_kw_hits = 0;
        for (const auto& w : r.gt_title) {
            const bool is_style =
                std::find(default_lexicon().style_words.begin(),
                          default_lexicon().style_words.end(),
                          w) != default_lexicon().style_words.end();
            if (!is_style) continue;
            ++style_words_in_title;
            oracle_kw += std::find(r.latent.keywords.begin(), r.latent.keywords.end(), w) !=
                         r.latent.keywords.end();
            random_kw_hits +=
                std::find(rand_kw.begin(), rand_kw.end(), w) != rand_kw.end();
        }
        if (style_words_in_title > 0) {
            oracle_recall += (double)oracle_kw / (double)style_words_in_title;
            random_recall += (double)random_kw_hits / (double)style_words_in_title;
        }
    }
    CHECK(oracle_palette > random_palette_score);
    CHECK(oracle_recall > random_recall);
}

TEST_CASE("history access counter") {
    DatasetConfig cfg;
    cfg.n_train_users = 2;
    cfg.n_test_users = 1;
    DatasetSplit ds = gen_dataset(cfg, 1);
    reset_history_access_count();
    CHECK(history_access_count() == 0);
    (void)ds.train[0].history();
    CHECK(history_access_count() == 1);
    reset_history_access_count();
}

TEST_CASE("pbs pairs share the foreground and differ in background palette") {
    Rng rng(17);
    auto pairs = gen_pbs_pairs(50, rng);
    CHECK(pairs.size() == 50);
    for (const auto& pr : pairs) {
        REQUIRE(pr.a.mask.has_value());
        REQUIRE(pr.b.mask.has_value());
        CHECK(*pr.a.mask == *pr.b.mask);
        bool bg_differs = false;
        for (size_t i = 0; i < 16; ++i) {
            if ((*pr.a.mask)[i]) {
                CHECK(pr.a.codes[i] == pr.b.codes[i]);  // same foreground
            } else {
                bg_differs |= (pr.a.codes[i] != pr.b.codes[i]);
            }
        }
        CHECK(bg_differs);
    }
}
