// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: dataset generation, training, evaluation, ablation
// suites, and single-ad sampling. Every command is a pure function of
// (config, input files, seed); exit codes: 0 success, 2 validation error,
// 3 provenance/digest error, 4 numeric failure.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "adgen/commands.hpp"

namespace {

adgen::RunConfig load_config(const std::string& config_path, std::uint64_t seed,
                             bool seed_given) {
    adgen::RunConfig cfg;
    if (!config_path.empty()) {
        cfg = adgen::RunConfig::load(config_path);
    } else {
        cfg.finalize();
    }
    if (seed_given) {
        cfg.seed = seed;
        cfg.finalize();
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adgen: unified ad-generation experiment harness"};
    app.require_subcommand(1);

    std::string config_path, dataset_path, out_path, resume_path, checkpoint_path;
    std::string product_path, history_path;
    std::uint64_t seed = 0;
    bool force = false;
    double temperature = 0.0;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration");
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_flag("--force", force, "overwrite existing outputs");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
    add_config(gen);
    gen->add_option("--out", out_path, "output dataset file (JSONL)")->required();

    CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
    add_config(train);
    train->add_option("--dataset", dataset_path, "dataset file")->required();
    train->add_option("--out", out_path, "output checkpoint")->required();
    train->add_option("--resume", resume_path, "resume from an earlier checkpoint");

    CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    evalc->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    evalc->add_option("--dataset", dataset_path, "dataset file")->required();
    evalc->add_option("--out", out_path, "output report (JSON)")->required();

    CLI::App* ablate = app.add_subcommand("ablate", "run the ablation suite");
    add_config(ablate);
    ablate->add_option("--dataset", dataset_path, "dataset file")->required();
    ablate->add_option("--out", out_path, "output directory")->required();

    CLI::App* samp = app.add_subcommand("sample", "generate one ad from a product file");
    samp->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    samp->add_option("--product", product_path, "product JSON file")->required();
    samp->add_option("--history", history_path, "optional user history JSON file");
    samp->add_option("--out", out_path, "output prefix for the rendered image")->required();
    samp->add_option("--temperature", temperature,
                     "sampling temperature (omit for greedy decoding)");
    samp->add_option("--seed", seed, "sampling seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int r = app.exit(e);
        return r == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            adgen::cmd::gen_data(load_config(config_path, seed, gen->count("--seed") > 0),
                                 out_path, force);
        } else if (train->parsed()) {
            adgen::cmd::train(load_config(config_path, seed, train->count("--seed") > 0),
                              dataset_path, out_path, force, resume_path);
        } else if (evalc->parsed()) {
            adgen::cmd::eval_checkpoint(checkpoint_path, dataset_path, out_path);
        } else if (ablate->parsed()) {
            adgen::cmd::ablate(load_config(config_path, seed, ablate->count("--seed") > 0),
                               dataset_path, out_path, force);
        } else if (samp->parsed()) {
            const bool greedy = samp->count("--temperature") == 0;
            adgen::cmd::sample(checkpoint_path, product_path, history_path, out_path,
                               greedy ? adgen::model::GenMode::kGreedy
                                      : adgen::model::GenMode::kTemperature,
                               temperature, seed, samp->count("--seed") > 0);
        }
    } catch (const adgen::ProvenanceError& e) {
        std::cerr << "provenance error: " << e.what() << "\n";
        return 3;
    } catch (const adgen::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const adgen::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
