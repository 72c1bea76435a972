// SPDX-License-Identifier: Apache-2.0
#include "adgen/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "adgen/digest.hpp"
#include "adgen/trainer.hpp"

namespace adgen::cmd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_writable(const std::string& path, bool force) {
    const fs::path p(path);
    if (p.has_parent_path() && !fs::exists(p.parent_path())) {
        throw FormatError("output directory does not exist: " + p.parent_path().string());
    }
    if (fs::exists(p) && !force) {
        throw FormatError("refusing to overwrite existing file " + path +
                          " (pass --force to replace it)");
    }
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing file: " + path);
}

struct LoadedDataset {
    data::DatasetSplit split;
    std::string hash;
};

LoadedDataset load_dataset(const std::string& path) {
    const std::string bytes = read_file(path);
    LoadedDataset out;
    out.hash = git_blob_hash(bytes);
    out.split = data::from_jsonl(bytes);
    data::validate_dataset(out.split);
    return out;
}

eval::EvalOutcome evaluate_trainer(const run::Trainer& tr, const std::string& actual_hash) {
    auto generator = [&tr](const data::UserRecord& user) {
        run::GeneratedAd ad = run::generate_for_user(tr, user);
        return eval::GeneratedSample{ad.title, ad.image};
    };
    return eval::run_personalized_eval(generator, tr.dataset.test, tr.pbs_enc,
                                       tr.config_digest_hex, tr.dataset_hash, actual_hash,
                                       tr.cfg.eval.max_eval_users);
}

std::string format_curve(const std::vector<double>& curve, long long first_step) {
    std::string out;
    char buf[64];
    for (size_t i = 0; i < curve.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%lld,%.17g\n",
                      first_step + static_cast<long long>(i), curve[i]);
        out += buf;
    }
    return out;
}

}  // namespace

void gen_data(const RunConfig& cfg, const std::string& out_path, bool force) {
    check_writable(out_path, force);
    data::DatasetSplit split = data::gen_dataset(cfg.dataset, cfg.seed);
    data::validate_dataset(split);
    write_file(out_path, data::to_jsonl(split));
    std::cout << "wrote dataset: " << out_path << " (" << split.train.size() << " train / "
              << split.test.size() << " test users, hash "
              << git_blob_hash_file(out_path).substr(0, 12) << ")\n";
}

void train(const RunConfig& cfg, const std::string& dataset_path,
           const std::string& out_checkpoint, bool force, const std::string& resume_path) {
    LoadedDataset ds = load_dataset(dataset_path);
    check_writable(out_checkpoint, force);

    std::unique_ptr<run::Trainer> tr;
    if (!resume_path.empty()) {
        LoadedCheckpoint ckpt = load_checkpoint(resume_path);
        if (ckpt.meta.dataset_hash != ds.hash) {
            throw ProvenanceError("resume checkpoint was trained on dataset " +
                                  ckpt.meta.dataset_hash + " but " + dataset_path +
                                  " hashes to " + ds.hash);
        }
        tr = run::trainer_from_checkpoint(ckpt, std::move(ds.split), ds.hash);
        std::cout << "resumed from " << resume_path << " at step " << tr->step << "\n";
    } else {
        tr = run::make_trainer(cfg, std::move(ds.split), ds.hash);
        std::vector<double> pbs_curve = run::train_pbs_encoder(*tr);
        std::cout << "pbs encoder trained: loss " << pbs_curve.front() << " -> "
                  << pbs_curve.back() << " over " << pbs_curve.size() << " steps\n";
    }

    const long long first_step = tr->step + 1;
    std::vector<double> curve;
    try {
        curve = run::train_model(*tr, [&](long long step) {
            save_trainer_checkpoint(*tr, out_checkpoint + ".step" + std::to_string(step));
        });
    } catch (const NumericError&) {
        // Keep the last periodic checkpoint as the last good state.
        write_file(out_checkpoint + ".losses.csv", format_curve(curve, first_step));
        throw;
    }
    save_trainer_checkpoint(*tr, out_checkpoint);
    write_file(out_checkpoint + ".losses.csv", format_curve(curve, first_step));
    if (!curve.empty()) {
        std::cout << "trained " << curve.size() << " steps: joint loss " << curve.front()
                  << " -> " << curve.back() << "\n";
    }
    std::cout << "wrote checkpoint: " << out_checkpoint << "\n";
}

eval::EvalOutcome eval_checkpoint(const std::string& checkpoint_path,
                                  const std::string& dataset_path,
                                  const std::string& out_report) {
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
    LoadedDataset ds = load_dataset(dataset_path);
    auto tr = run::trainer_from_checkpoint(ckpt, std::move(ds.split), ckpt.meta.dataset_hash);
    eval::EvalOutcome outcome = evaluate_trainer(*tr, ds.hash);

    json report = outcome.to_json();
    report["mode"] = mode_name(tr->cfg.mode);
    report["step"] = tr->step;
    write_file(out_report, report.dump(2) + "\n");
    const std::string table =
        eval::metrics_table({{mode_name(tr->cfg.mode), outcome}});
    write_file(out_report + ".txt", table);
    std::cout << table;
    return outcome;
}

namespace {

struct CellKey {
    AblationMode mode;
    SamplingStrategy strategy;
    size_t n_sample;
    std::uint64_t seed;
    bool operator<(const CellKey& o) const {
        return std::tie(mode, strategy, n_sample, seed) <
               std::tie(o.mode, o.strategy, o.n_sample, o.seed);
    }
};

json outcome_json(const eval::EvalOutcome& o) {
    return {{"pbs", o.pbs}, {"bleu", o.bleu}, {"rouge", o.rouge}};
}

eval::EvalOutcome mean_outcome(const std::vector<eval::EvalOutcome>& os) {
    eval::EvalOutcome m;
    for (const auto& o : os) {
        m.pbs += o.pbs;
        m.bleu += o.bleu;
        m.rouge += o.rouge;
        m.user_count = o.user_count;
    }
    const double inv = 1.0 / static_cast<double>(os.size());
    m.pbs *= inv;
    m.bleu *= inv;
    m.rouge *= inv;
    return m;
}

}  // namespace

void ablate(const RunConfig& cfg, const std::string& dataset_path, const std::string& out_dir,
            bool force) {
    LoadedDataset ds = load_dataset(dataset_path);
    fs::create_directories(out_dir);
    const std::string report_path = (fs::path(out_dir) / "report.json").string();
    check_writable(report_path, force);

    const std::vector<AblationMode> modes = {AblationMode::kBaseline,
                                             AblationMode::kWithHistory,
                                             AblationMode::kWithPss, AblationMode::kFull};

    // Cell set: 4 modes x all seeds, history-length sweep and strategy
    // sweep on the first seed. Coinciding cells are trained once.
    std::vector<CellKey> wanted;
    for (AblationMode m : modes) {
        for (std::uint64_t s : cfg.ablate.seeds) {
            wanted.push_back({m, SamplingStrategy::kProductSimilarity,
                              cfg.preference.n_sample, s});
        }
    }
    const std::uint64_t sweep_seed = cfg.ablate.seeds.front();
    for (size_t len : cfg.ablate.history_lengths) {
        wanted.push_back(len == 0
                             ? CellKey{AblationMode::kBaseline,
                                       SamplingStrategy::kProductSimilarity,
                                       cfg.preference.n_sample, sweep_seed}
                             : CellKey{AblationMode::kFull,
                                       SamplingStrategy::kProductSimilarity, len, sweep_seed});
    }
    for (const std::string& st : cfg.ablate.strategies) {
        wanted.push_back({AblationMode::kFull, strategy_from_name(st),
                          cfg.preference.n_sample, sweep_seed});
    }

    std::map<CellKey, eval::EvalOutcome> cells;
    size_t trained = 0;
    for (const CellKey& key : wanted) {
        if (cells.count(key)) continue;
        RunConfig cell_cfg = cfg;
        cell_cfg.mode = key.mode;
        cell_cfg.strategy = key.strategy;
        cell_cfg.preference.n_sample = key.n_sample;
        cell_cfg.seed = key.seed;
        cell_cfg.finalize();
        auto tr = run::make_trainer(cell_cfg, ds.split, ds.hash);
        run::train_pbs_encoder(*tr);
        run::train_model(*tr);
        cells[key] = evaluate_trainer(*tr, ds.hash);
        ++trained;
        std::cout << "[ablate] " << mode_name(key.mode) << " seed=" << key.seed
                  << " strategy=" << strategy_name(key.strategy) << " N=" << key.n_sample
                  << "  PBS=" << cells[key].pbs << " BLEU=" << cells[key].bleu
                  << " ROUGE=" << cells[key].rouge << "\n";
    }

    json report;
    report["config_digest"] = config_digest(cfg);
    report["dataset_hash"] = ds.hash;
    json cell_list = json::array();
    for (const auto& [key, o] : cells) {
        json c = outcome_json(o);
        c["mode"] = mode_name(key.mode);
        c["strategy"] = strategy_name(key.strategy);
        c["n_sample"] = key.n_sample;
        c["seed"] = key.seed;
        cell_list.push_back(std::move(c));
    }
    report["cells"] = std::move(cell_list);

    // Table-2-shaped seed means.
    std::vector<std::pair<std::string, eval::EvalOutcome>> table_rows;
    json table2;
    for (AblationMode m : modes) {
        std::vector<eval::EvalOutcome> per_seed;
        for (std::uint64_t s : cfg.ablate.seeds) {
            per_seed.push_back(cells.at({m, SamplingStrategy::kProductSimilarity,
                                         cfg.preference.n_sample, s}));
        }
        eval::EvalOutcome mean = mean_outcome(per_seed);
        const std::string label = m == AblationMode::kFull ? "ours" : mode_name(m);
        table2[label] = outcome_json(mean);
        table_rows.emplace_back(label, mean);
    }
    report["table2_seed_means"] = std::move(table2);

    json sweep = json::array();
    for (size_t len : cfg.ablate.history_lengths) {
        const CellKey key =
            len == 0 ? CellKey{AblationMode::kBaseline, SamplingStrategy::kProductSimilarity,
                               cfg.preference.n_sample, sweep_seed}
                     : CellKey{AblationMode::kFull, SamplingStrategy::kProductSimilarity, len,
                               sweep_seed};
        json row = outcome_json(cells.at(key));
        row["history_length"] = len;
        sweep.push_back(std::move(row));
    }
    report["history_length_sweep"] = std::move(sweep);

    json strat = json::array();
    for (const std::string& st : cfg.ablate.strategies) {
        json row = outcome_json(cells.at({AblationMode::kFull, strategy_from_name(st),
                                          cfg.preference.n_sample, sweep_seed}));
        row["strategy"] = st;
        strat.push_back(std::move(row));
    }
    report["strategy_sweep"] = std::move(strat);

    write_file(report_path, report.dump(2) + "\n");
    const std::string table = eval::metrics_table(table_rows);
    write_file((fs::path(out_dir) / "table.txt").string(), table);
    std::cout << table;
    std::cout << "trained " << trained << " cells; report: " << report_path << "\n";
}

void sample(const std::string& checkpoint_path, const std::string& product_path,
            const std::string& history_path, const std::string& out_prefix,
            model::GenMode mode, double temperature, std::uint64_t seed_override,
            bool has_seed_override) {
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
    auto tr = run::trainer_from_checkpoint(ckpt, data::DatasetSplit{}, ckpt.meta.dataset_hash);

    json pj;
    try {
        pj = json::parse(read_file(product_path));
    } catch (const json::parse_error& e) {
        throw FormatError("product file parse error: " + std::string(e.what()));
    }
    data::ProductSpec product;
    if (pj.contains("description") && pj.contains("selling_points")) {
        product.category = pj.value("category", 0);
        product.shape = pj.value("shape", 0);
        product.color = static_cast<std::uint8_t>(pj.value("color", 0));
        product.description = pj.at("description").get<std::vector<std::string>>();
        product.selling_points = pj.at("selling_points").get<std::vector<std::string>>();
        if (product.shape >= data::kNumShapes || product.color >= 16) {
            throw FormatError("product file: shape must be in [0,8) and color in [0,16)");
        }
    } else {
        const size_t category = pj.value("category", 0);
        Rng prod_rng(pj.value("product_seed", 0));
        product = data::gen_product(category, prod_rng);
    }

    std::vector<pref::HistoryItem> history;
    if (!history_path.empty()) {
        json hj;
        try {
            hj = json::parse(read_file(history_path));
        } catch (const json::parse_error& e) {
            throw FormatError("history file parse error: " + std::string(e.what()));
        }
        if (!hj.is_array()) throw FormatError("history file must be a JSON array");
        for (const json& h : hj) {
            pref::HistoryItem item;
            const auto codes = h.at("image_codes").get<std::vector<int>>();
            item.image = tr->codebook.decode(codes);
            item.text = h.at("title").get<std::vector<std::string>>();
            item.product_text = h.at("product_text").get<std::vector<std::string>>();
            history.push_back(std::move(item));
        }
    }

    Rng rng = Rng(has_seed_override ? seed_override : tr->cfg.seed).child("sample");
    run::GeneratedAd ad =
        run::generate_ad(*tr, product, history, /*use_control=*/true, mode, temperature, rng);

    std::string title;
    for (const auto& w : ad.title) {
        if (!title.empty()) title += ' ';
        title += w;
    }
    std::cout << "title: " << (title.empty() ? "(empty)" : title) << "\n";
    std::cout << "image codes:\n";
    for (size_t r = 0; r < 4; ++r) {
        std::cout << "  ";
        for (size_t c = 0; c < 4; ++c) {
            std::printf("%2d ", static_cast<int>(ad.image.codes[r * 4 + c]));
        }
        std::cout << "\n";
    }
    const std::string ppm_path = out_prefix + ".ppm";
    write_file(ppm_path, tr->codebook.to_ppm(ad.image));
    std::cout << "wrote " << ppm_path << "\n";
}

}  // namespace adgen::cmd
