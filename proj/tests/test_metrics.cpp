// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "adgen/metrics.hpp"
#include "adgen/pbs.hpp"
#include "adgen/rng.hpp"

using namespace adgen;
using namespace adgen::eval;

namespace {

// Independent brute-force BLEU oracle: literal n-gram enumeration with
// nested loops, no shared code with the implementation.
double brute_bleu(const Words& cand, const std::vector<Words>& refs) {
    const size_t top_n = std::min<size_t>(4, cand.size());
    double psum = 0;
    for (size_t n = 1; n <= top_n; ++n) {
        std::map<std::string, int> cand_counts;
        auto key = [&](const Words& w, size_t i) {
            std::string k;
            for (size_t j = 0; j < n; ++j) k += w[i + j] + "\x01";
            return k;
        };
        for (size_t i = 0; i + n <= cand.size(); ++i) cand_counts[key(cand, i)]++;
        long long total = 0, matched = 0;
        for (const auto& [gram, c] : cand_counts) {
            total += c;
            int best_ref = 0;
            for (const Words& ref : refs) {
                int cnt = 0;
                for (size_t i = 0; i + n <= ref.size(); ++i) {
                    if (key(ref, i) == gram) ++cnt;
                }
                best_ref = std::max(best_ref, cnt);
            }
            matched += std::min<long long>(c, best_ref);
        }
        psum += total ? (double)matched / (double)total : 0.0;
    }
    double mean = psum / (double)top_n;
    size_t shortest = refs[0].size();
    for (const auto& r : refs) shortest = std::min(shortest, r.size());
    double bp = cand.size() >= shortest
                    ? 1.0
                    : std::exp(1.0 - (double)shortest / (double)cand.size());
    return bp * mean;
}

// Recursive LCS oracle with memoization, independent of the DP in metrics.
size_t lcs_oracle(const Words& a, const Words& b, size_t i, size_t j,
                  std::map<std::pair<size_t, size_t>, size_t>& memo) {
    if (i == a.size() || j == b.size()) return 0;
    auto k = std::make_pair(i, j);
    auto it = memo.find(k);
    if (it != memo.end()) return it->second;
    size_t r;
    if (a[i] == b[j]) {
        r = 1 + lcs_oracle(a, b, i + 1, j + 1, memo);
    } else {
        r = std::max(lcs_oracle(a, b, i + 1, j, memo), lcs_oracle(a, b, i, j + 1, memo));
    }
    memo[k] = r;
    return r;
}

Words random_words(Rng& rng, size_t lo, size_t hi, size_t vocab) {
    static const char* pool[] = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
    Words out;
    const size_t n = lo + rng.below(hi - lo + 1);
    for (size_t i = 0; i < n; ++i) out.push_back(pool[rng.below(vocab)]);
    return out;
}

}  // namespace

TEST_CASE("bleu basics") {
    SUBCASE("candidate equals the sole reference") {
        CHECK(bleu({"a", "b", "c"}, {{"a", "b", "c"}}) == 1.0);
        CHECK(bleu({"a"}, {{"a"}}) == 1.0);  // shorter than 4-grams still scores 1
    }
    SUBCASE("fully disjoint vocabularies") {
        CHECK(bleu({"a", "b"}, {{"c", "d"}}) == 0.0);
    }
    SUBCASE("worked example: precisions 2/3, 1/2, 0 -> 7/18") {
        const double got = bleu({"a", "b", "c"}, {{"a", "b", "d"}});
        CHECK(got == doctest::Approx(7.0 / 18.0).epsilon(1e-12));
    }
    SUBCASE("empty inputs rejected") {
        CHECK_THROWS_AS(bleu({}, {{"a"}}), ContractError);
        CHECK_THROWS_AS(bleu({"a"}, {}), ContractError);
    }
}

TEST_CASE("bleu matches the brute-force oracle on 1000 random pairs") {
    Rng rng(42);
    for (int rep = 0; rep < 1000; ++rep) {
        Words cand = random_words(rng, 1, 8, 5);
        std::vector<Words> refs;
        const size_t nrefs = 1 + rng.below(3);
        for (size_t r = 0; r < nrefs; ++r) refs.push_back(random_words(rng, 1, 8, 5));
        CHECK(bleu(cand, refs) == brute_bleu(cand, refs));
    }
}

TEST_CASE("m_bleu") {
    SUBCASE("pool containing the candidate verbatim scores 1") {
        CHECK(m_bleu({"a", "b"}, {{"c"}, {"a", "b"}, {"d", "e"}}) == 1.0);
    }
    SUBCASE("single-reference pool reduces to bleu") {
        Rng rng(3);
        for (int rep = 0; rep < 100; ++rep) {
            Words cand = random_words(rng, 1, 6, 4);
            Words ref = random_words(rng, 1, 6, 4);
            CHECK(m_bleu(cand, {ref}) == bleu(cand, {ref}));
        }
    }
    SUBCASE("adding a reference never decreases the score") {
        Rng rng(9);
        for (int rep = 0; rep < 1000; ++rep) {
            Words cand = random_words(rng, 1, 7, 4);
            std::vector<Words> pool = {random_words(rng, 1, 7, 4)};
            double prev = m_bleu(cand, pool);
            for (int add = 0; add < 3; ++add) {
                pool.push_back(random_words(rng, 1, 7, 4));
                const double cur = m_bleu(cand, pool);
                CHECK(cur >= prev);
                prev = cur;
            }
        }
    }
}

TEST_CASE("rouge_l") {
    SUBCASE("identity and disjoint") {
        CHECK(rouge_l({"a", "b", "c"}, {{"a", "b", "c"}}) == 1.0);
        CHECK(rouge_l({"a", "b"}, {{"c", "d"}}) == 0.0);
    }
    SUBCASE("worked example: LCS 3 of 4 -> F1 0.75") {
        CHECK(rouge_l({"a", "b", "c", "d"}, {{"a", "c", "b", "d"}}) ==
              doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("LCS matches the recursive oracle") {
        Rng rng(7);
        for (int rep = 0; rep < 300; ++rep) {
            Words a = random_words(rng, 1, 9, 4);
            Words b = random_words(rng, 1, 9, 4);
            std::map<std::pair<size_t, size_t>, size_t> memo;
            CHECK(lcs_length(a, b) == lcs_oracle(a, b, 0, 0, memo));
        }
    }
}

TEST_CASE("m_rouge composite stays in range and hits the identity bound") {
    RougeBreakdown ident = m_rouge({"a", "b", "c", "d"}, {{"a", "b", "c", "d"}});
    CHECK(ident.composite == 1.0);
    RougeBreakdown disj = m_rouge({"a", "b"}, {{"c", "d"}});
    CHECK(disj.composite == 0.0);
    Rng rng(13);
    for (int rep = 0; rep < 300; ++rep) {
        Words cand = random_words(rng, 1, 8, 4);
        RougeBreakdown rb = m_rouge(cand, {random_words(rng, 1, 8, 4)});
        CHECK(rb.composite >= 0.0);
        CHECK(rb.composite <= 1.0);
    }
}

TEST_CASE("pbs encoder embeddings") {
    Rng rng(5);
    nn::ParamSet params;
    PbsConfig cfg;
    PbsEncoder enc = init_pbs(params, cfg, rng);

    SUBCASE("unit norm within 1e-9") {
        for (int rep = 0; rep < 20; ++rep) {
            tok::SyntheticImage img;
            for (auto& c : img.codes) c = static_cast<std::uint8_t>(rng.below(16));
            Tape tape;
            Tensor e = pbs_embed(tape, img, enc);
            double norm2 = 0;
            for (double v : e.data()) norm2 += v * v;
            CHECK(std::abs(std::sqrt(norm2) - 1.0) <= 1e-9);
        }
    }

    SUBCASE("identical images score 1 and the score is symmetric bitwise") {
        tok::SyntheticImage a, b;
        for (size_t i = 0; i < 16; ++i) {
            a.codes[i] = static_cast<std::uint8_t>(rng.below(16));
            b.codes[i] = static_cast<std::uint8_t>(rng.below(16));
        }
        CHECK(pbs_score(a, a, enc) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(pbs_score(a, b, enc) == pbs_score(b, a, enc));
        CHECK(pbs_score(a, b, enc) >= -1.0 - 1e-12);
        CHECK(pbs_score(a, b, enc) <= 1.0 + 1e-12);
    }

    SUBCASE("too few training pairs rejected") {
        auto pairs = data::gen_pbs_pairs(10, rng);
        nn::ParamSet state;
        nn::init_adam_state(params, state);
        CHECK_THROWS_AS(pbs_train(pairs, enc, params, state, 5, rng), ContractError);
    }

    SUBCASE("short training run decreases the loss and grows the gap") {
        auto pairs = data::gen_pbs_pairs(128, rng);
        nn::ParamSet state;
        nn::init_adam_state(params, state);
        Rng probe_rng(99);
        const double gap_before = pbs_gap(enc, 40, probe_rng);
        Rng train_rng(7);
        auto curve = pbs_train(pairs, enc, params, state, 60, train_rng);
        CHECK(curve.back() < curve.front());
        Rng probe_rng2(99);
        const double gap_after = pbs_gap(enc, 40, probe_rng2);
        CHECK(gap_after > gap_before);
    }
}
