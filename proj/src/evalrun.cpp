// SPDX-License-Identifier: Apache-2.0
#include "adgen/evalrun.hpp"

#include <sstream>

namespace adgen::eval {

using nlohmann::json;

std::vector<MetricReport> EvalOutcome::reports() const {
    auto mk = [this](const char* name, double v) {
        return MetricReport{name, v, user_count, config_digest};
    };
    return {mk("pbs", pbs),          mk("bleu", bleu),       mk("rouge", rouge),
            mk("rouge_l", rouge_l),  mk("rouge_1", rouge_n[0]), mk("rouge_2", rouge_n[1]),
            mk("rouge_3", rouge_n[2]), mk("rouge_4", rouge_n[3])};
}

json EvalOutcome::to_json() const {
    json j;
    j["user_count"] = user_count;
    j["config_digest"] = config_digest;
    j["dataset_hash"] = dataset_hash;
    j["metrics"] = {{"pbs", pbs},
                    {"bleu", bleu},
                    {"rouge", rouge},
                    {"rouge_l", rouge_l},
                    {"rouge_1", rouge_n[0]},
                    {"rouge_2", rouge_n[1]},
                    {"rouge_3", rouge_n[2]},
                    {"rouge_4", rouge_n[3]}};
    return j;
}

EvalOutcome run_personalized_eval(const AdGenerator& generate,
                                  const std::vector<data::UserRecord>& test_users,
                                  const PbsEncoder& pbs_encoder,
                                  const std::string& config_digest,
                                  const std::string& expected_dataset_hash,
                                  const std::string& actual_dataset_hash, size_t max_users) {
    if (expected_dataset_hash != actual_dataset_hash) {
        throw ProvenanceError("dataset hash mismatch: checkpoint was trained on " +
                              expected_dataset_hash + " but the provided dataset hashes to " +
                              actual_dataset_hash);
    }
    if (test_users.empty()) throw ContractError("run_personalized_eval: no test users");

    EvalOutcome out;
    out.config_digest = config_digest;
    out.dataset_hash = actual_dataset_hash;
    size_t n = test_users.size();
    if (max_users > 0) n = std::min(n, max_users);

    double rn_sum[4] = {0, 0, 0, 0};
    size_t rn_count[4] = {0, 0, 0, 0};
    for (size_t i = 0; i < n; ++i) {
        const data::UserRecord& user = test_users[i];
        GeneratedSample pred = generate(user);
        out.pbs += pbs_score(pred.image, user.gt_image, pbs_encoder);
        if (pred.title.empty()) {
            // A degenerate empty title scores zero on every text metric.
            continue;
        }
        out.bleu += m_bleu(pred.title, {user.gt_title});
        RougeBreakdown rb = m_rouge(pred.title, {user.gt_title});
        out.rouge += rb.composite;
        out.rouge_l += rb.rouge_l;
        for (size_t k = 0; k < 4; ++k) {
            if (rb.rouge_n[k] >= 0) {
                rn_sum[k] += rb.rouge_n[k];
                rn_count[k]++;
            }
        }
    }
    out.user_count = n;
    const double inv = 1.0 / static_cast<double>(n);
    out.pbs *= inv;
    out.bleu *= inv;
    out.rouge *= inv;
    out.rouge_l *= inv;
    for (size_t k = 0; k < 4; ++k) {
        out.rouge_n[k] = rn_count[k] ? rn_sum[k] / static_cast<double>(rn_count[k]) : 0.0;
    }
    return out;
}

double foreground_agreement(const tok::SyntheticImage& generated,
                            const tok::SyntheticImage& transparent) {
    if (!transparent.mask) {
        throw ContractError("foreground_agreement: transparent image has no foreground mask");
    }
    size_t fg = 0, hit = 0;
    for (size_t i = 0; i < tok::SyntheticImage::kPatches; ++i) {
        if (!(*transparent.mask)[i]) continue;
        ++fg;
        hit += generated.codes[i] == transparent.codes[i];
    }
    if (fg == 0) throw ContractError("foreground_agreement: empty foreground mask");
    return static_cast<double>(hit) / static_cast<double>(fg);
}

std::string metrics_table(const std::vector<std::pair<std::string, EvalOutcome>>& rows) {
    std::ostringstream os;
    os << "Method            PBS     BLEU    ROUGE\n";
    os << "---------------------------------------\n";
    char buf[128];
    for (const auto& [label, o] : rows) {
        std::snprintf(buf, sizeof(buf), "%-15s %6.3f  %6.3f  %6.3f\n", label.c_str(), o.pbs,
                      o.bleu, o.rouge);
        os << buf;
    }
    return os.str();
}

}  // namespace adgen::eval
