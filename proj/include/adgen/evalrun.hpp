// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adgen/metrics.hpp"
#include "adgen/pbs.hpp"
#include "adgen/synthdata.hpp"

namespace adgen::eval {

struct MetricReport {
    std::string metric;
    double value = 0;
    size_t count = 0;
    std::string config_digest;
};

struct GeneratedSample {
    std::vector<std::string> title;
    tok::SyntheticImage image;
};

using AdGenerator = std::function<GeneratedSample(const data::UserRecord&)>;

struct EvalOutcome {
    size_t user_count = 0;
    double pbs = 0;
    double bleu = 0;
    double rouge = 0;           // composite m-ROUGE
    double rouge_l = 0;
    double rouge_n[4] = {0, 0, 0, 0};
    std::string config_digest;
    std::string dataset_hash;

    std::vector<MetricReport> reports() const;
    nlohmann::json to_json() const;
};

// Generates an ad per test user and scores PBS against the GT image plus
// BLEU / m-ROUGE against the GT title. expected_dataset_hash comes from the
// checkpoint; a mismatch with the actual dataset hash is a provenance error.
EvalOutcome run_personalized_eval(const AdGenerator& generate,
                                  const std::vector<data::UserRecord>& test_users,
                                  const PbsEncoder& pbs_encoder,
                                  const std::string& config_digest,
                                  const std::string& expected_dataset_hash,
                                  const std::string& actual_dataset_hash,
                                  size_t max_users = 0);

// Plain-text table in the ablation-study layout (rows = labels, columns
// PBS / BLEU / ROUGE).
std::string metrics_table(const std::vector<std::pair<std::string, EvalOutcome>>& rows);

// Fraction of the transparent image's foreground patches whose generated
// code matches the product patch. The transparent image must carry a mask.
double foreground_agreement(const tok::SyntheticImage& generated,
                            const tok::SyntheticImage& transparent);

}  // namespace adgen::eval
