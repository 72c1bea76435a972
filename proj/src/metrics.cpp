// SPDX-License-Identifier: Apache-2.0
#include "adgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace adgen::eval {

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts count_ngrams(const Words& w, size_t n) {
    NgramCounts out;
    if (w.size() < n) return out;
    for (size_t i = 0; i + n <= w.size(); ++i) {
        out[std::vector<std::string>(w.begin() + i, w.begin() + i + n)]++;
    }
    return out;
}

void require_refs(const std::vector<Words>& references, const char* op) {
    if (references.empty()) {
        throw ContractError(std::string(op) + ": empty reference set");
    }
    for (const Words& r : references) {
        if (r.empty()) throw ContractError(std::string(op) + ": empty reference");
    }
}

}  // namespace

double bleu(const Words& candidate, const std::vector<Words>& references, size_t max_n) {
    if (candidate.empty()) throw ContractError("bleu: empty candidate");
    require_refs(references, "bleu");
    if (max_n == 0) throw ParamError("bleu: max_n must be >= 1");

    const size_t top_n = std::min(max_n, candidate.size());
    double precision_sum = 0;
    for (size_t n = 1; n <= top_n; ++n) {
        NgramCounts cand = count_ngrams(candidate, n);
        NgramCounts clip;
        for (const Words& ref : references) {
            NgramCounts rc = count_ngrams(ref, n);
            for (const auto& [gram, c] : rc) {
                auto it = clip.find(gram);
                if (it == clip.end()) {
                    clip.emplace(gram, c);
                } else {
                    it->second = std::max(it->second, c);
                }
            }
        }
        long long matched = 0, total = 0;
        for (const auto& [gram, c] : cand) {
            total += c;
            auto it = clip.find(gram);
            if (it != clip.end()) matched += std::min(c, it->second);
        }
        precision_sum += total > 0 ? static_cast<double>(matched) / static_cast<double>(total)
                                   : 0.0;
    }
    const double mean_precision = precision_sum / static_cast<double>(top_n);

    size_t shortest_ref = references[0].size();
    for (const Words& r : references) shortest_ref = std::min(shortest_ref, r.size());
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(shortest_ref);
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return bp * mean_precision;
}

double m_bleu(const Words& candidate, const std::vector<Words>& candidate_pool) {
    return bleu(candidate, candidate_pool, 4);
}

size_t lcs_length(const Words& a, const Words& b) {
    std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const Words& candidate, const std::vector<Words>& references) {
    if (candidate.empty()) throw ContractError("rouge_l: empty candidate");
    require_refs(references, "rouge_l");
    double best = 0;
    for (const Words& ref : references) {
        const double lcs = static_cast<double>(lcs_length(candidate, ref));
        if (lcs == 0) continue;
        const double p = lcs / static_cast<double>(candidate.size());
        const double r = lcs / static_cast<double>(ref.size());
        best = std::max(best, 2 * p * r / (p + r));
    }
    return best;
}

double rouge_n_recall(const Words& candidate, const std::vector<Words>& references, size_t n) {
    if (candidate.empty()) throw ContractError("rouge_n: empty candidate");
    require_refs(references, "rouge_n");
    NgramCounts cand = count_ngrams(candidate, n);
    double best = -1.0;
    for (const Words& ref : references) {
        if (ref.size() < n) continue;
        NgramCounts rc = count_ngrams(ref, n);
        long long matched = 0, total = 0;
        for (const auto& [gram, c] : rc) {
            total += c;
            auto it = cand.find(gram);
            if (it != cand.end()) matched += std::min(c, it->second);
        }
        best = std::max(best, static_cast<double>(matched) / static_cast<double>(total));
    }
    return best;
}

RougeBreakdown m_rouge(const Words& candidate, const std::vector<Words>& references) {
    RougeBreakdown out;
    double sum = 0;
    size_t defined = 0;
    for (size_t n = 1; n <= 4; ++n) {
        out.rouge_n[n - 1] = rouge_n_recall(candidate, references, n);
        if (out.rouge_n[n - 1] >= 0) {
            sum += out.rouge_n[n - 1];
            ++defined;
        }
    }
    out.rouge_l = rouge_l(candidate, references);
    sum += out.rouge_l;
    ++defined;
    out.composite = sum / static_cast<double>(defined);
    return out;
}

}  // namespace adgen::eval
