// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "adgen/config.hpp"
#include "adgen/evalrun.hpp"
#include "adgen/model.hpp"

namespace adgen::cmd {

// Generates the dataset file (JSONL). Refuses to overwrite without force.
void gen_data(const RunConfig& cfg, const std::string& out_path, bool force);

// PBS-encoder training followed by model training with periodic
// checkpoints ("<out>.step<N>"), a final checkpoint at <out>, and a loss
// curve at "<out>.losses.csv" (one row per step run). With resume_path the
// run continues bit-exactly from that checkpoint using its embedded config.
void train(const RunConfig& cfg, const std::string& dataset_path,
           const std::string& out_checkpoint, bool force, const std::string& resume_path = "");

// Evaluates a checkpoint on the dataset's test split; writes the JSON
// report to out_report and a plain-text metrics table to "<out_report>.txt".
eval::EvalOutcome eval_checkpoint(const std::string& checkpoint_path,
                                  const std::string& dataset_path,
                                  const std::string& out_report);

// Trains and evaluates the four ablation modes over the configured seeds,
// plus a history-length sweep and a sampling-strategy sweep (first seed),
// reusing cells that coincide. Writes report.json and table.txt in out_dir.
void ablate(const RunConfig& cfg, const std::string& dataset_path, const std::string& out_dir,
            bool force);

// Generates one ad from a product file (and optional history file); writes
// "<out_prefix>.ppm" and prints the title and code grid.
void sample(const std::string& checkpoint_path, const std::string& product_path,
            const std::string& history_path, const std::string& out_prefix,
            model::GenMode mode, double temperature, std::uint64_t seed_override,
            bool has_seed_override);

}  // namespace adgen::cmd
