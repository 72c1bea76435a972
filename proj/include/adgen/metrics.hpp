// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "adgen/common.hpp"

namespace adgen::eval {

using Words = std::vector<std::string>;

// BLEU averaged over 1- to 4-gram matches: arithmetic mean of the
// multi-reference clipped n-gram precisions for n = 1..min(max_n, |cand|),
// times the brevity penalty against the shortest reference length. The
// shortest-reference penalty keeps the score monotone in the reference
// pool, which the multi-candidate variant relies on.
double bleu(const Words& candidate, const std::vector<Words>& references, size_t max_n = 4);

// Multi-candidate BLEU: the whole pool forms the multi-reference set
// (clipped counts take the max over references).
double m_bleu(const Words& candidate, const std::vector<Words>& candidate_pool);

// Max over references of the LCS-based F1 (beta = 1).
double rouge_l(const Words& candidate, const std::vector<Words>& references);

// Max over references of clipped n-gram recall; references shorter than n
// are skipped. Returns -1 when no reference defines the score.
double rouge_n_recall(const Words& candidate, const std::vector<Words>& references, size_t n);

// Composite m-ROUGE: mean of the defined ROUGE-1..4 recalls and the ROUGE-L
// F1. Components are reported alongside for transparency.
struct RougeBreakdown {
    double rouge_n[4];  // -1 where undefined
    double rouge_l = 0;
    double composite = 0;
};
RougeBreakdown m_rouge(const Words& candidate, const std::vector<Words>& references);

size_t lcs_length(const Words& a, const Words& b);

}  // namespace adgen::eval
