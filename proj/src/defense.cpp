#include "bdlab/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bdlab/io.hpp"
#include "bdlab/parallel.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

namespace {

void validate_optim(const TrainConfig& optim, const char* where) {
    if (optim.lr < real_t(0)) fail(ErrorKind::InvalidConfig, std::string(where) + ": lr must be >= 0");
    if (optim.momentum < real_t(0) || optim.momentum >= real_t(1))
        fail(ErrorKind::InvalidConfig, std::string(where) + ": momentum must lie in [0,1)");
    if (optim.batch_size < 1)
        fail(ErrorKind::InvalidConfig, std::string(where) + ": batch_size must be >= 1");
}

}  // namespace

Network unlearn_trigger(const Network& net, const Dataset& clean_train, const UnlearnSource& source,
                        const UnlearnConfig& cfg) {
    if (cfg.epochs < 0) fail(ErrorKind::InvalidConfig, "unlearn: epochs must be >= 0");
    if (!(cfg.triggered_fraction > 0.0) || cfg.triggered_fraction > 1.0)
        fail(ErrorKind::InvalidConfig, "unlearn: triggered_fraction must lie in (0,1]");
    validate_optim(cfg.optim, "unlearn");
    check_compatible(net, clean_train, "unlearn");

    const TriggerSpec* spec = std::get_if<TriggerSpec>(&source);
    const std::vector<AdvExample>* adv = std::get_if<std::vector<AdvExample>>(&source);
    if (spec) {
        validate_trigger(*spec, clean_train.image_shape());
    } else {
        if (adv->empty())
            fail(ErrorKind::EmptyEvaluationSet, "unlearn: no adversarial examples to unlearn");
        for (const AdvExample& e : *adv) {
            e.pixels.require_shape(net.input_shape, "unlearn adversarial example");
            if (e.true_label < 0 || e.true_label >= net.num_classes)
                fail(ErrorKind::LabelOutOfRange, "unlearn: adversarial example label out of range");
        }
    }

    if (cfg.epochs == 0) return net;

    Network model = net;
    SgdState mom = make_sgd_state(model);
    Rng rng(cfg.seed);
    const std::size_t n = clean_train.samples.size();
    const std::size_t stamp_count =
        std::min<std::size_t>(n, static_cast<std::size_t>(std::lround(cfg.triggered_fraction * n)));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> pool(n);
    std::size_t adv_cursor = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        // A fresh random subset each epoch carries the trigger; drawing it
        // separately from the visit order spreads stamped slots over batches.
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        rng.shuffle(pool);
        std::vector<int> adv_pick(n, -1);  // -1 = clean slot; else index into *adv
        std::vector<char> stamped(n, 0);
        for (std::size_t i = 0; i < stamp_count; ++i) {
            stamped[pool[i]] = 1;
            if (adv) {
                adv_pick[pool[i]] = static_cast<int>(adv_cursor);
                adv_cursor = (adv_cursor + 1) % adv->size();
            }
        }

        for (std::size_t start = 0; start < n; start += cfg.optim.batch_size) {
            const std::size_t count = std::min<std::size_t>(cfg.optim.batch_size, n - start);
            std::vector<BackwardResult> slots(count);
            parallel_for(count, cfg.optim.threads, [&](std::size_t k) {
                const std::size_t idx = order[start + k];
                const LabeledImage& s = clean_train.samples[idx];
                const Tensor* x = &s.pixels;
                int label = s.label;
                Tensor triggered;
                if (stamped[idx]) {
                    if (spec) {
                        triggered = apply_trigger(s.pixels, *spec);
                        x = &triggered;  // true label kept: the model must unlearn the flip
                    } else {
                        const AdvExample& e = (*adv)[adv_pick[idx]];
                        x = &e.pixels;
                        label = e.true_label;
                    }
                }
                const auto acts = forward_all(model, *x);
                auto [loss, dlogits] = softmax_cross_entropy(acts.back(), label);
                slots[k] = backward_network(model, *x, acts, std::move(dlogits), {}, true);
                slots[k].loss = loss;
            });
            BatchGrads batch = reduce_param_grads(model, slots);
            if (!std::isfinite(batch.loss_sum))
                fail(ErrorKind::DivergedLoss, "unlearn: non-finite loss in epoch " + std::to_string(epoch));
            sgd_step(model, mom, batch.grads, cfg.optim.lr, cfg.optim.momentum,
                     cfg.optim.weight_decay);
        }
    }
    return model;
}

std::vector<int> default_attention_tags(const Network& net) {
    std::vector<int> tags;
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        if (net.layers[i].kind == LayerKind::relu && net.layers[i].out_shape.size() == 3)
            tags.push_back(static_cast<int>(i));
    return tags;
}

DistillResult distill_repair(const Network& student, const Network& teacher,
                             const Dataset& clean_subset, const DistillConfig& cfg) {
    if (cfg.epochs < 0) fail(ErrorKind::InvalidConfig, "distill: epochs must be >= 0");
    if (cfg.lambda_attn < 0) fail(ErrorKind::InvalidConfig, "distill: lambda_attn must be >= 0");
    validate_optim(cfg.optim, "distill");
    if (!same_architecture(student, teacher))
        fail(ErrorKind::ArchitectureMismatch, "distill: teacher and student architectures differ");
    check_compatible(student, clean_subset, "distill");

    const bool use_attention = cfg.lambda_attn != 0.0;
    std::vector<int> tags = cfg.attn_layers.empty() ? default_attention_tags(student) : cfg.attn_layers;
    if (use_attention) {
        if (tags.empty()) fail(ErrorKind::InvalidConfig, "distill: no attention layers to align");
        for (int t : tags) {
            if (t < 0 || t >= static_cast<int>(student.layers.size()))
                fail(ErrorKind::InvalidConfig, "distill: attention tag out of range");
            if (student.layers[t].out_shape.size() != 3)
                fail(ErrorKind::InvalidConfig,
                     "distill: attention tag " + std::to_string(t) + " is not a C,H,W activation");
        }
    }

    DistillResult result{student, {}};
    if (cfg.epochs == 0) return result;

    const std::size_t n = clean_subset.samples.size();
    const real_t lambda = static_cast<real_t>(cfg.lambda_attn);

    // The teacher is frozen, so its attention maps per sample never change;
    // compute them once up front.
    std::vector<std::vector<Tensor>> teacher_maps;
    if (use_attention) {
        teacher_maps.resize(n);
        parallel_for(n, cfg.optim.threads, [&](std::size_t i) {
            const auto acts = forward_all(teacher, clean_subset.samples[i].pixels);
            teacher_maps[i].reserve(tags.size());
            for (int t : tags) teacher_maps[i].push_back(attention_map(acts[t]));
        });
    }

    Network& model = result.net;
    SgdState mom = make_sgd_state(model);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0;
        for (std::size_t start = 0; start < n; start += cfg.optim.batch_size) {
            const std::size_t count = std::min<std::size_t>(cfg.optim.batch_size, n - start);
            std::vector<BackwardResult> slots(count);
            parallel_for(count, cfg.optim.threads, [&](std::size_t k) {
                const std::size_t idx = order[start + k];
                const LabeledImage& s = clean_subset.samples[idx];
                const auto acts = forward_all(model, s.pixels);
                auto [loss, dlogits] = softmax_cross_entropy(acts.back(), s.label);

                std::vector<Tensor> inj_store;
                std::vector<std::pair<int, const Tensor*>> injections;
                if (use_attention) {
                    inj_store.reserve(tags.size());
                    for (std::size_t ti = 0; ti < tags.size(); ++ti) {
                        const Tensor& a = acts[tags[ti]];
                        const Tensor map = attention_map(a);
                        const Tensor& target = teacher_maps[idx][ti];
                        Tensor dmap(map.shape());
                        real_t sq = 0;
                        for (std::size_t p = 0; p < map.size(); ++p) {
                            const real_t diff = map[p] - target[p];
                            sq += diff * diff;
                            dmap[p] = real_t(2) * lambda * diff;
                        }
                        loss += lambda * sq;
                        inj_store.push_back(attention_backward(a, dmap));
                    }
                    for (std::size_t ti = 0; ti < tags.size(); ++ti)
                        injections.emplace_back(tags[ti], &inj_store[ti]);
                }

                slots[k] = backward_network(model, s.pixels, acts, std::move(dlogits), injections, true);
                slots[k].loss = loss;
            });
            BatchGrads batch = reduce_param_grads(model, slots);
            if (!std::isfinite(batch.loss_sum))
                fail(ErrorKind::DivergedLoss, "distill: non-finite loss in epoch " + std::to_string(epoch));
            sgd_step(model, mom, batch.grads, cfg.optim.lr, cfg.optim.momentum,
                     cfg.optim.weight_decay);
            loss_sum += batch.loss_sum;
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(n));
    }
    return result;
}

ReportRow repair_report(const Network& before, const Network& after, const Dataset& eval_ds,
                        const Dataset& direction_ds, const TriggerSpec& spec,
                        const BackdoorDirection& dir_before, const std::string& defense_name,
                        const AttackConfig& fga_cfg, int threads,
                        const AttackSummary* before_hint) {
    if (fga_cfg.kind != AttackKind::fga)
        fail(ErrorKind::InvalidConfig, "repair_report: the re-attack must be the guided attack");
    if (!same_architecture(before, after))
        fail(ErrorKind::LineageMismatch, "repair_report: before/after architectures differ");
    if (dir_before.model_hash != network_hash(before))
        fail(ErrorKind::LineageMismatch,
             "repair_report: direction was not estimated on the pre-defense model");
    check_compatible(before, eval_ds, "repair_report");
    check_compatible(before, direction_ds, "repair_report(direction)");

    ReportRow row;
    row.defense = defense_name;
    row.attack = to_string(spec.kind);
    row.epsilon = static_cast<double>(fga_cfg.epsilon);

    row.acc_before = evaluate_accuracy(before, eval_ds, threads);
    row.acc_after = evaluate_accuracy(after, eval_ds, threads);
    row.asr_orig_before = attack_success_rate(before, eval_ds, spec, threads);
    row.asr_orig_after = attack_success_rate(after, eval_ds, spec, threads);

    if (before_hint) {
        row.fga_before = before_hint->success;
        row.align_before = before_hint->align;
    } else {
        const BatchAttackResult r = batch_attack(before, eval_ds, fga_cfg, &dir_before,
                                                 dir_before.target_label, threads);
        row.fga_before = r.success_rate;
        row.align_before = r.mean_alignment;
    }

    // The stale direction is useless against the repaired model (and the
    // attack's provenance check would reject it); estimate a fresh one.
    const BackdoorDirection dir_after = estimate_direction(after, direction_ds, spec, threads);
    const BatchAttackResult r_after = batch_attack(after, eval_ds, fga_cfg, &dir_after,
                                                   dir_after.target_label, threads);
    row.fga_after = r_after.success_rate;
    row.align_after = r_after.mean_alignment;
    return row;
}

void save_report_csv(const std::vector<ReportRow>& rows, const std::string& path) {
    std::string out =
        csv_row({"defense", "attack", "epsilon", "acc_before", "acc_after", "asr_orig_before",
                 "asr_orig_after", "fga_before", "fga_after", "align_before", "align_after"});
    for (const ReportRow& r : rows) {
        out += csv_row({r.defense, r.attack, fmt_real(r.epsilon), fmt_real(r.acc_before),
                        fmt_real(r.acc_after), fmt_real(r.asr_orig_before),
                        fmt_real(r.asr_orig_after), fmt_real(r.fga_before), fmt_real(r.fga_after),
                        fmt_real(r.align_before), fmt_real(r.align_after)});
    }
    atomic_write_file(path, out);
}

}  // namespace bdlab
