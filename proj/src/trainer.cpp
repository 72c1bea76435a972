// SPDX-License-Identifier: Apache-2.0
#include "adgen/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "adgen/digest.hpp"

namespace adgen::run {

Trainer::Trainer(const RunConfig& c)
    : cfg(c),
      vocab(data::default_lexicon().all),
      templates(c.template_file.empty() ? data::default_templates()
                                        : tok::load_templates(c.template_file)) {
    cfg.finalize();
    config_digest_hex = config_digest(cfg);
    Rng init = Rng(cfg.seed).child("init");
    mp = model::init_params(params, cfg.model, init);
    ex = pref::init_extractor(params, cfg.model.d_model, cfg.model.n_heads,
                              vocab.lexicon_size(), init);
    nn::init_adam_state(params, adam_state);
    Rng pbs_init = Rng(cfg.seed).child("pbs_init");
    pbs_enc = eval::init_pbs(pbs_params, cfg.pbs, pbs_init);
    nn::init_adam_state(pbs_params, pbs_adam);
}

std::unique_ptr<Trainer> make_trainer(const RunConfig& cfg, data::DatasetSplit dataset,
                                      std::string dataset_hash) {
    auto tr = std::make_unique<Trainer>(cfg);
    tr->dataset = std::move(dataset);
    tr->dataset_hash = std::move(dataset_hash);
    return tr;
}

std::unique_ptr<Trainer> trainer_from_checkpoint(const LoadedCheckpoint& ckpt,
                                                 data::DatasetSplit dataset,
                                                 std::string dataset_hash) {
    auto tr = make_trainer(ckpt.meta.config, std::move(dataset), std::move(dataset_hash));
    ckpt.restore_into(tr->params);
    ckpt.restore_into(tr->adam_state);
    ckpt.restore_into(tr->pbs_params);
    ckpt.restore_into(tr->pbs_adam);
    tr->step = ckpt.meta.step;
    return tr;
}

void save_trainer_checkpoint(const Trainer& tr, const std::string& path) {
    CheckpointMeta meta;
    meta.config = tr.cfg;
    meta.config_digest = tr.config_digest_hex;
    meta.dataset_hash = tr.dataset_hash;
    meta.step = tr.step;
    meta.rng_seed = tr.cfg.seed;
    save_checkpoint(path, meta, {&tr.params, &tr.adam_state, &tr.pbs_params, &tr.pbs_adam});
}

double gumbel_tau(const RunConfig& cfg, long long step) {
    const double t0 = cfg.preference.tau_start;
    const double t1 = cfg.preference.tau_end;
    const double total = static_cast<double>(std::max<size_t>(cfg.training.steps, 2) - 1);
    const double frac = std::clamp(static_cast<double>(step - 1) / total, 0.0, 1.0);
    return t0 + (t1 - t0) * frac;
}

std::vector<pref::HistoryItem> select_history(const data::UserRecord& user, AblationMode mode,
                                              SamplingStrategy strategy, size_t n_sample,
                                              double epsilon, Rng& rng) {
    if (mode == AblationMode::kBaseline || n_sample == 0) return {};
    std::vector<pref::HistoryItem> pool;
    for (const data::HistoryRecord& h : user.history()) pool.push_back(h.item);
    if (pool.empty()) return {};

    // with_history draws uniformly; with_pss and the full model follow the
    // configured strategy (product similarity by default).
    SamplingStrategy effective =
        mode == AblationMode::kWithHistory ? SamplingStrategy::kRandom : strategy;

    if (effective == SamplingStrategy::kRandom) {
        std::vector<double> uniform(pool.size(), 1.0 / static_cast<double>(pool.size()));
        return pref::sample_histories(pool, uniform, n_sample, rng);
    }
    std::vector<double> s = pref::compute_similarity(pool, user.target.description);
    if (effective == SamplingStrategy::kMostSimilar) {
        std::vector<size_t> order(pool.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return s[a] > s[b]; });
        std::vector<pref::HistoryItem> out;
        for (size_t i = 0; i < std::min(n_sample, order.size()); ++i) {
            out.push_back(pool[order[i]]);
        }
        return out;
    }
    std::vector<double> p = pref::sampling_weights(s, epsilon);
    return pref::sample_histories(pool, p, n_sample, rng);
}

std::vector<int> build_instruction(const Trainer& tr, const data::UserRecord& user, Rng& rng) {
    const std::string& tmpl = tr.templates[rng.below(tr.templates.size())];
    return tok::render_instruction(tmpl, user.target.description, user.target.selling_points,
                                   tr.vocab);
}

model::EmbeddingOverride build_override(const Trainer& tr, Tape& tape,
                                        const data::UserRecord& user,
                                        const std::vector<int>& instruction,
                                        AblationMode mode, double tau, Rng& rng) {
    if (mode == AblationMode::kBaseline) {
        return pref::zero_preference_override(instruction, tr.cfg.model.d_model, tr.vocab);
    }
    std::vector<pref::HistoryItem> items =
        select_history(user, mode, tr.cfg.strategy, tr.cfg.preference.n_sample,
                       tr.cfg.preference.epsilon, rng);
    if (items.empty()) {
        return pref::zero_preference_override(instruction, tr.cfg.model.d_model, tr.vocab);
    }
    if (mode == AblationMode::kFull) {
        Tensor ev = pref::relevance_extract(tape, items, pref::Modality::kVisual, tr.ex,
                                            tr.vocab, tr.cfg.preference.keep_ratio, tau, rng);
        Tensor et = pref::relevance_extract(tape, items, pref::Modality::kTextual, tr.ex,
                                            tr.vocab, tr.cfg.preference.keep_ratio, tau, rng);
        pref::PreferenceTokens pt = pref::fuse_preferences(tape, ev, et, tr.ex);
        return pref::build_personalized_instruction(tape, instruction, pt, tr.vocab);
    }
    // with_history / with_pss: mean-pooled input tokens, no extraction.
    Tensor ev = pref::encode_history_tokens(tape, items, pref::Modality::kVisual, tr.ex,
                                            tr.vocab);
    Tensor et = pref::encode_history_tokens(tape, items, pref::Modality::kTextual, tr.ex,
                                            tr.vocab);
    return pref::make_preference_override(tape, instruction, tape.mean_rows(ev),
                                          tape.mean_rows(et), tr.vocab);
}

model::StepResult run_one_step(Trainer& tr) {
    tr.step += 1;
    const long long t = tr.step;
    Rng step_rng = Rng(tr.cfg.seed).child("train_step", static_cast<std::uint64_t>(t));
    const double tau = gumbel_tau(tr.cfg, t);

    Tape tape;
    std::vector<tok::SyntheticImage> transparents(tr.cfg.training.batch_size);
    std::vector<model::BatchItem> batch;
    batch.reserve(tr.cfg.training.batch_size);
    for (size_t i = 0; i < tr.cfg.training.batch_size; ++i) {
        const size_t uid = static_cast<size_t>(step_rng.below(tr.dataset.train.size()));
        Rng ex_rng = step_rng.child("ex", i);
        const data::UserRecord& user = tr.dataset.train[uid];

        std::vector<int> instr = build_instruction(tr, user, ex_rng);
        std::vector<int> image_codes(user.gt_image.codes.begin(), user.gt_image.codes.end());
        tok::TokenSequence seq = tok::assemble_sequence(
            instr, tok::encode_text(user.gt_title, tr.vocab), image_codes, tr.vocab);

        transparents[i] = data::transparent_image(user.target);
        model::BatchItem item;
        item.seq = std::move(seq);
        item.transparent = &transparents[i];
        item.override_rows = build_override(tr, tape, user, instr, tr.cfg.mode, tau, ex_rng);
        batch.push_back(std::move(item));
    }

    nn::AdamW opt;
    opt.lr = tr.cfg.training.lr;
    opt.beta1 = tr.cfg.training.beta1;
    opt.beta2 = tr.cfg.training.beta2;
    opt.eps = tr.cfg.training.adam_eps;
    opt.weight_decay = tr.cfg.training.weight_decay;
    return model::train_step(tape, batch, tr.params, tr.adam_state, opt, t, tr.mp,
                             tr.cfg.model);
}

std::vector<double> train_model(Trainer& tr, const std::function<void(long long)>& on_checkpoint) {
    std::vector<double> curve;
    const long long total = static_cast<long long>(tr.cfg.training.steps);
    while (tr.step < total) {
        model::StepResult r = run_one_step(tr);
        curve.push_back(r.joint);
        if (on_checkpoint &&
            (tr.step % static_cast<long long>(tr.cfg.training.checkpoint_every) == 0 ||
             tr.step == total)) {
            on_checkpoint(tr.step);
        }
    }
    return curve;
}

std::vector<double> train_pbs_encoder(Trainer& tr) {
    Rng pair_rng = Rng(tr.cfg.seed).child("pbs_pairs");
    auto pairs = data::gen_pbs_pairs(tr.cfg.training.pbs_pairs, pair_rng);
    Rng train_rng = Rng(tr.cfg.seed).child("pbs_train");
    return eval::pbs_train(pairs, tr.pbs_enc, tr.pbs_params, tr.pbs_adam,
                           tr.cfg.training.pbs_steps, train_rng);
}

namespace {

GeneratedAd generate_impl(const Trainer& tr, const data::ProductSpec& product,
                          const std::vector<int>& instruction,
                          const model::EmbeddingOverride& ov, bool use_control,
                          model::GenMode mode, double temperature, Rng& rng) {
    Tape tape;
    tape.set_grad_enabled(false);
    Tensor patch_controls;
    const Tensor* pc = nullptr;
    if (use_control) {
        tok::SyntheticImage transparent = data::transparent_image(product);
        patch_controls = model::foreground_patch_controls(tape, transparent, tr.mp.fp,
                                                          tr.cfg.model.n_heads);
        pc = &patch_controls;
    }
    model::GenResult gen =
        model::generate(instruction, pc, &ov, tr.mp, tr.cfg.model, tr.vocab, mode, temperature,
                        rng, tr.cfg.eval.max_text_words);
    GeneratedAd ad;
    ad.title = tok::decode_text(gen.text_ids, tr.vocab);
    ad.image = tr.codebook.decode(gen.image_codes);
    return ad;
}

}  // namespace

GeneratedAd generate_for_user(const Trainer& tr, const data::UserRecord& user, bool use_control,
                              model::GenMode mode, double temperature) {
    Rng rng = Rng(tr.cfg.seed).child("eval_user", user.user_id);
    std::vector<int> instruction = build_instruction(tr, user, rng);
    Tape tape;
    tape.set_grad_enabled(false);
    model::EmbeddingOverride ov = build_override(tr, tape, user, instruction, tr.cfg.mode,
                                                 tr.cfg.preference.tau_end, rng);
    return generate_impl(tr, user.target, instruction, ov, use_control, mode, temperature, rng);
}

GeneratedAd generate_ad(const Trainer& tr, const data::ProductSpec& product,
                        const std::vector<pref::HistoryItem>& history, bool use_control,
                        model::GenMode mode, double temperature, Rng& rng) {
    const std::string& tmpl = tr.templates[rng.below(tr.templates.size())];
    std::vector<int> instruction = tok::render_instruction(
        tmpl, product.description, product.selling_points, tr.vocab);

    Tape tape;
    tape.set_grad_enabled(false);
    model::EmbeddingOverride ov;
    if (history.empty() || tr.cfg.mode == AblationMode::kBaseline) {
        ov = pref::zero_preference_override(instruction, tr.cfg.model.d_model, tr.vocab);
    } else {
        // Follow the checkpoint's preference pipeline with the provided
        // history standing in for the user pool.
        std::vector<double> s = pref::compute_similarity(history, product.description);
        std::vector<double> p = pref::sampling_weights(s, tr.cfg.preference.epsilon);
        std::vector<pref::HistoryItem> items =
            pref::sample_histories(history, p, tr.cfg.preference.n_sample, rng);
        if (tr.cfg.mode == AblationMode::kFull) {
            Tensor ev =
                pref::relevance_extract(tape, items, pref::Modality::kVisual, tr.ex, tr.vocab,
                                        tr.cfg.preference.keep_ratio,
                                        tr.cfg.preference.tau_end, rng);
            Tensor et =
                pref::relevance_extract(tape, items, pref::Modality::kTextual, tr.ex, tr.vocab,
                                        tr.cfg.preference.keep_ratio,
                                        tr.cfg.preference.tau_end, rng);
            pref::PreferenceTokens pt = pref::fuse_preferences(tape, ev, et, tr.ex);
            ov = pref::build_personalized_instruction(tape, instruction, pt, tr.vocab);
        } else {
            Tensor ev = pref::encode_history_tokens(tape, items, pref::Modality::kVisual,
                                                    tr.ex, tr.vocab);
            Tensor et = pref::encode_history_tokens(tape, items, pref::Modality::kTextual,
                                                    tr.ex, tr.vocab);
            ov = pref::make_preference_override(tape, instruction, tape.mean_rows(ev),
                                                tape.mean_rows(et), tr.vocab);
        }
    }
    return generate_impl(tr, product, instruction, ov, use_control, mode, temperature, rng);
}

}  // namespace adgen::run
