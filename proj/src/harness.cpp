#include "bdlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "bdlab/fixtures.hpp"
#include "bdlab/io.hpp"
#include "bdlab/probe.hpp"
#include "bdlab/rng.hpp"
#include "bdlab/ssim.hpp"
#include "bdlab/train.hpp"

namespace bdlab {

namespace {

std::string join_path(const std::string& dir, const std::string& rel) {
    return dir + "/" + rel;
}

// Collects notes and artifact paths while a phase runs, then lands them in
// manifest_<phase>.txt as line-oriented key=value pairs. Artifacts are listed
// only after they were written, so every listed path exists on success.
class Manifest {
public:
    Manifest(Phase phase, const ExperimentConfig& cfg, const RunOptions& opts)
        : phase_(phase), opts_(opts), start_(std::chrono::steady_clock::now()) {
        lines_.push_back(std::string("phase = ") + to_string(phase));
        lines_.push_back(std::string("tool_version = ") + kToolVersion);
        lines_.push_back("config_hash = " + config_hash(cfg));
        lines_.push_back("seed = " + std::to_string(cfg.seed));
        lines_.push_back("threads = " + std::to_string(opts.threads));
    }

    void note(const std::string& text) { lines_.push_back("note = " + text); }
    void artifact(const std::string& rel) { lines_.push_back("artifact = " + rel); }

    void finish() {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", elapsed);
        lines_.push_back(std::string("elapsed_seconds = ") + buf);
        std::string out;
        for (const std::string& line : lines_) {
            out += line;
            out += "\n";
        }
        atomic_write_file(join_path(opts_.out_dir, std::string("manifest_") + to_string(phase_) + ".txt"),
                          out);
    }

private:
    Phase phase_;
    const RunOptions& opts_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> lines_;
};

Shape image_shape(const ExperimentConfig& cfg) {
    return {cfg.data.channels, cfg.data.height, cfg.data.width};
}

std::string eps_label(double epsilon_255) { return fmt_real(epsilon_255); }

// Seed tags are derived from human-readable strings so every phase can
// reconstruct them independently; see the README's determinism section.
std::uint64_t seed_for(const ExperimentConfig& cfg, const std::string& tag) {
    return derive_seed(cfg.seed, tag);
}

struct Tagged {
    TriggerKind kind;
    double rate;
    std::string tag;
    TriggerSpec spec;
};

std::vector<Tagged> tagged_models(const ExperimentConfig& cfg) {
    std::vector<Tagged> out;
    for (TriggerKind kind : cfg.trigger.kinds)
        for (double rate : cfg.poison.rates)
            out.push_back({kind, rate, model_tag(kind, rate), trigger_from_config(cfg, kind)});
    return out;
}

// Probe samples: correctly classified, true label != target, drawn from the
// direction-estimation split so each sample's own displacement magnitude is
// on record. Capped to keep curve cost flat as datasets grow.
std::vector<LabeledImage> probe_samples(const Network& net, const Dataset& ds, int target,
                                        std::size_t cap = 100) {
    std::vector<LabeledImage> out;
    for (const LabeledImage& s : ds.samples) {
        if (s.label == target) continue;
        if (predict(net, s.pixels) != s.label) continue;
        out.push_back(s);
        if (out.size() == cap) break;
    }
    return out;
}

void save_histogram_csv(const std::vector<int>& histogram, const std::string& path) {
    std::string out = csv_row({"class", "count"});
    for (std::size_t c = 0; c < histogram.size(); ++c)
        out += csv_row({std::to_string(c), std::to_string(histogram[c])});
    atomic_write_file(path, out);
}

void save_step_curve_csv(const std::vector<double>& curve, const std::string& path) {
    std::string out = csv_row({"step", "success_fraction"});
    for (std::size_t k = 0; k < curve.size(); ++k)
        out += csv_row({std::to_string(k + 1), fmt_real(curve[k])});
    atomic_write_file(path, out);
}

// ---- phase: train ------------------------------------------------------------

void phase_train(const ExperimentConfig& cfg, const RunOptions& opts) {
    Manifest manifest(Phase::train, cfg, opts);
    for (const char* dir : {"data", "poison", "models", "history"})
        ensure_directory(join_path(opts.out_dir, dir));

    const Shape shape = image_shape(cfg);
    const int splits_per_class[3] = {cfg.data.per_class, cfg.data.val_per_class,
                                     cfg.data.test_per_class};
    const Split split_kinds[3] = {Split::train, Split::val, Split::test};
    const char* split_names[3] = {"train", "val", "test"};
    SynthTuning eval_tune = cfg.data.tune;
    eval_tune.label_noise = 0;  // evaluation splits keep true labels
    Dataset datasets[3];
    for (int i = 0; i < 3; ++i) {
        datasets[i] = synth_dataset(cfg.data.classes, splits_per_class[i], shape,
                                    derive_seed(cfg.seed, "data", static_cast<std::uint64_t>(i)),
                                    split_kinds[i], i == 0 ? cfg.data.tune : eval_tune);
        const std::string rel = std::string("data/") + split_names[i] + ".bdld";
        save_dataset(datasets[i], join_path(opts.out_dir, rel));
        manifest.artifact(rel);
    }
    const Dataset& train_ds = datasets[0];
    const Dataset& val_ds = datasets[1];

    Network clean_init = make_model(cfg, seed_for(cfg, "init_clean"));
    auto [clean, clean_hist] =
        train(clean_init, train_ds, val_ds, train_config_from(cfg, seed_for(cfg, "train_clean"), opts.threads));
    save_network(clean, join_path(opts.out_dir, "models/clean.bdlm"));
    manifest.artifact("models/clean.bdlm");
    save_history_csv(clean_hist, join_path(opts.out_dir, "history/clean.csv"));
    manifest.artifact("history/clean.csv");

    for (const Tagged& t : tagged_models(cfg)) {
        auto [poisoned, plan] =
            poison_dataset(train_ds, t.spec, t.rate, seed_for(cfg, "poison_" + t.tag));
        save_dataset(poisoned, join_path(opts.out_dir, "poison/" + t.tag + ".bdld"));
        manifest.artifact("poison/" + t.tag + ".bdld");
        std::string plan_csv = csv_row({"sample_id"});
        for (int id : plan.poisoned_ids) plan_csv += csv_row({std::to_string(id)});
        atomic_write_file(join_path(opts.out_dir, "poison/" + t.tag + "_plan.csv"), plan_csv);
        manifest.artifact("poison/" + t.tag + "_plan.csv");

        Network init = make_model(cfg, seed_for(cfg, "init_" + t.tag));
        auto [model, hist] = train(init, poisoned, val_ds,
                                   train_config_from(cfg, seed_for(cfg, "train_" + t.tag), opts.threads),
                                   &t.spec);
        save_network(model, join_path(opts.out_dir, "models/" + t.tag + ".bdlm"));
        manifest.artifact("models/" + t.tag + ".bdlm");
        save_history_csv(hist, join_path(opts.out_dir, "history/" + t.tag + ".csv"));
        manifest.artifact("history/" + t.tag + ".csv");
    }
    manifest.finish();
}

// ---- phase: probe ------------------------------------------------------------

void phase_probe(const ExperimentConfig& cfg, const RunOptions& opts) {
    Manifest manifest(Phase::probe, cfg, opts);
    for (const char* dir : {"directions", "figures", "probe"})
        ensure_directory(join_path(opts.out_dir, dir));

    require_artifact(join_path(opts.out_dir, "data/val.bdld"));
    require_artifact(join_path(opts.out_dir, "models/clean.bdlm"));
    const Dataset val_ds = load_dataset(join_path(opts.out_dir, "data/val.bdld"), Split::val);
    const Network clean = load_network<real_t>(join_path(opts.out_dir, "models/clean.bdlm"));

    std::string head_csv =
        csv_row({"model", "attack", "class", "projection", "is_target", "is_dominant"});
    const auto probe_one = [&](const Network& net, const TriggerSpec& spec, const std::string& name) {
        const BackdoorDirection dir = estimate_direction(net, val_ds, spec, opts.threads);
        save_direction(dir, join_path(opts.out_dir, "directions/" + name + ".bdir"));
        manifest.artifact("directions/" + name + ".bdir");

        const std::vector<LabeledImage> samples = probe_samples(net, val_ds, spec.target_label);
        const InterpolationCurve curve =
            interpolation_probe(net, samples, dir, default_alpha_grid(), opts.threads);
        save_curve_csv(curve, join_path(opts.out_dir, "figures/interp_" + name + ".csv"));
        manifest.artifact("figures/interp_" + name + ".csv");

        const auto [proj, dominant] = head_projection(net, dir);
        for (std::size_t c = 0; c < proj.size(); ++c)
            head_csv += csv_row({name, to_string(spec.kind), std::to_string(c), fmt_real(proj[c]),
                                 std::to_string(static_cast<int>(c) == spec.target_label ? 1 : 0),
                                 std::to_string(static_cast<int>(c) == dominant ? 1 : 0)});
    };

    for (const Tagged& t : tagged_models(cfg)) {
        require_artifact(join_path(opts.out_dir, "models/" + t.tag + ".bdlm"));
        const Network net = load_network<real_t>(join_path(opts.out_dir, "models/" + t.tag + ".bdlm"));
        probe_one(net, t.spec, t.tag);
    }
    // The same probes on the clean model document the contrast: its curve
    // stays near chance and its head projection carries no guarantee.
    for (TriggerKind kind : cfg.trigger.kinds)
        probe_one(clean, trigger_from_config(cfg, kind), std::string("clean_") + to_string(kind));

    atomic_write_file(join_path(opts.out_dir, "probe/head_projection.csv"), head_csv);
    manifest.artifact("probe/head_projection.csv");
    manifest.note("direction_samples=validation_correctly_classified");
    manifest.finish();
}

// ---- phase: attack -----------------------------------------------------------

void phase_attack(const ExperimentConfig& cfg, const RunOptions& opts) {
    Manifest manifest(Phase::attack, cfg, opts);
    for (const char* dir : {"attacks", "figures"})
        ensure_directory(join_path(opts.out_dir, dir));

    require_artifact(join_path(opts.out_dir, "data/test.bdld"));
    const Dataset test_ds = load_dataset(join_path(opts.out_dir, "data/test.bdld"), Split::test);
    const Dataset sub = eval_subset(test_ds, cfg.attack.eval_count);
    const double max_rate = *std::max_element(cfg.poison.rates.begin(), cfg.poison.rates.end());

    std::string summary =
        csv_row({"model", "attack", "epsilon_255", "success_rate", "mean_alignment"});
    for (const Tagged& t : tagged_models(cfg)) {
        require_artifact(join_path(opts.out_dir, "models/" + t.tag + ".bdlm"));
        require_artifact(join_path(opts.out_dir, "directions/" + t.tag + ".bdir"));
        const Network net = load_network<real_t>(join_path(opts.out_dir, "models/" + t.tag + ".bdlm"));
        const BackdoorDirection dir =
            load_direction(join_path(opts.out_dir, "directions/" + t.tag + ".bdir"));

        for (double eps : cfg.attack.epsilons) {
            for (AttackKind kind :
                 {AttackKind::untargeted_pgd, AttackKind::targeted_pgd, AttackKind::fga}) {
                const std::string run_name =
                    t.tag + "_" + to_string(kind) + "_eps" + eps_label(eps);
                const AttackConfig acfg =
                    attack_config_from(cfg, kind, eps, seed_for(cfg, "atk_" + run_name));
                const BatchAttackResult result =
                    batch_attack(net, sub, acfg, kind == AttackKind::fga ? &dir : nullptr,
                                 t.spec.target_label, opts.threads);
                save_outcomes_csv(result, join_path(opts.out_dir, "attacks/" + run_name + ".csv"));
                manifest.artifact("attacks/" + run_name + ".csv");
                summary += csv_row({t.tag, to_string(kind), eps_label(eps),
                                    fmt_real(result.success_rate), fmt_real(result.mean_alignment)});

                if (kind == AttackKind::untargeted_pgd) {
                    save_histogram_csv(label_distribution(net, result.outcomes),
                                       join_path(opts.out_dir, "figures/hist_" + run_name + ".csv"));
                    manifest.artifact("figures/hist_" + run_name + ".csv");
                } else if (kind == AttackKind::fga) {
                    save_step_curve_csv(result.step_curve,
                                        join_path(opts.out_dir, "figures/steps_" + run_name + ".csv"));
                    manifest.artifact("figures/steps_" + run_name + ".csv");
                }
            }
        }

        // Guidance-strength sweep at the smallest budget, once per trigger
        // kind (at the highest poison rate): how hard the attack leans on the
        // direction versus how often it lands.
        if (t.rate == max_rate) {
            std::string sweep = csv_row({"beta", "success_rate", "mean_alignment"});
            const double eps0 = cfg.attack.epsilons.front();
            for (double beta : cfg.attack.betas) {
                AttackConfig acfg = attack_config_from(
                    cfg, AttackKind::fga, eps0,
                    seed_for(cfg, "atk_" + t.tag + "_fga_b" + fmt_real(beta) + "_eps" + eps_label(eps0)));
                acfg.beta = static_cast<real_t>(beta);
                const BatchAttackResult result =
                    batch_attack(net, sub, acfg, &dir, t.spec.target_label, opts.threads);
                sweep += csv_row({fmt_real(beta), fmt_real(result.success_rate),
                                  fmt_real(result.mean_alignment)});
            }
            const std::string rel = std::string("figures/beta_sweep_") + to_string(t.kind) + ".csv";
            atomic_write_file(join_path(opts.out_dir, rel), sweep);
            manifest.artifact(rel);
        }
    }
    atomic_write_file(join_path(opts.out_dir, "attacks/summary.csv"), summary);
    manifest.artifact("attacks/summary.csv");
    manifest.note("asr_excludes_target_class=1");
    manifest.finish();
}

// ---- phase: defend -----------------------------------------------------------

void phase_defend(const ExperimentConfig& cfg, const RunOptions& opts) {
    Manifest manifest(Phase::defend, cfg, opts);
    ensure_directory(join_path(opts.out_dir, "defense"));

    require_artifact(join_path(opts.out_dir, "data/train.bdld"));
    require_artifact(join_path(opts.out_dir, "models/clean.bdlm"));
    const Dataset train_ds = load_dataset(join_path(opts.out_dir, "data/train.bdld"), Split::train);
    const Network teacher = load_network<real_t>(join_path(opts.out_dir, "models/clean.bdlm"));
    const Dataset discovery = eval_subset(train_ds, cfg.attack.eval_count);

    for (const Tagged& t : tagged_models(cfg)) {
        require_artifact(join_path(opts.out_dir, "models/" + t.tag + ".bdlm"));
        require_artifact(join_path(opts.out_dir, "directions/" + t.tag + ".bdir"));
        const Network net = load_network<real_t>(join_path(opts.out_dir, "models/" + t.tag + ".bdlm"));
        const BackdoorDirection dir =
            load_direction(join_path(opts.out_dir, "directions/" + t.tag + ".bdir"));

        UnlearnConfig ucfg;
        ucfg.epochs = cfg.defense.unlearn_epochs;
        ucfg.triggered_fraction = cfg.defense.triggered_fraction;
        ucfg.optim = train_config_from(cfg, 0, opts.threads);
        ucfg.optim.lr = static_cast<real_t>(cfg.defense.finetune_lr);
        ucfg.seed = seed_for(cfg, "unlearn_" + t.tag);

        const Network unlearned = unlearn_trigger(net, train_ds, t.spec, ucfg);
        save_network(unlearned, join_path(opts.out_dir, "defense/" + t.tag + "_unlearn.bdlm"));
        manifest.artifact("defense/" + t.tag + "_unlearn.bdlm");

        // Alternative-trigger unlearning: discover adversarial examples with
        // the guided attack, then unlearn on those instead of the trigger.
        const AttackConfig fga_cfg =
            attack_config_from(cfg, AttackKind::fga, cfg.attack.epsilons.front(),
                               seed_for(cfg, "alt_fga_" + t.tag), /*record_trace=*/false);
        const BatchAttackResult found =
            batch_attack(net, discovery, fga_cfg, &dir, t.spec.target_label, opts.threads);
        std::vector<AdvExample> examples;
        for (std::size_t i = 0; i < found.outcomes.size(); ++i) {
            if (!found.outcomes[i].success) continue;
            const int id = found.sample_ids[i];
            examples.push_back({found.outcomes[i].x_adv, discovery.samples[i].label, id});
        }
        if (examples.empty()) {
            // Nothing landed (possible at tiny budgets): unlearn on every
            // attempt instead so the phase stays deterministic and complete.
            for (std::size_t i = 0; i < found.outcomes.size(); ++i)
                examples.push_back(
                    {found.outcomes[i].x_adv, discovery.samples[i].label, found.sample_ids[i]});
            manifest.note("alt_examples_fallback=" + t.tag);
        }
        manifest.note("alt_examples_" + t.tag + "=" + std::to_string(examples.size()) + "/" +
                      std::to_string(found.outcomes.size()));
        UnlearnConfig alt_cfg = ucfg;
        alt_cfg.seed = seed_for(cfg, "unlearn_alt_" + t.tag);
        const Network alt = unlearn_trigger(net, train_ds, examples, alt_cfg);
        save_network(alt, join_path(opts.out_dir, "defense/" + t.tag + "_unlearn_alt.bdlm"));
        manifest.artifact("defense/" + t.tag + "_unlearn_alt.bdlm");

        DistillConfig dcfg;
        dcfg.lambda_attn = cfg.defense.lambda;
        dcfg.epochs = cfg.defense.distill_epochs;
        dcfg.optim = ucfg.optim;
        dcfg.seed = seed_for(cfg, "distill_" + t.tag);
        DistillResult distilled = distill_repair(net, teacher, train_ds, dcfg);
        save_network(distilled.net, join_path(opts.out_dir, "defense/" + t.tag + "_distill.bdlm"));
        manifest.artifact("defense/" + t.tag + "_distill.bdlm");
        std::string loss_csv = csv_row({"epoch", "loss"});
        for (std::size_t e = 0; e < distilled.epoch_loss.size(); ++e)
            loss_csv += csv_row({std::to_string(e + 1), fmt_real(distilled.epoch_loss[e])});
        atomic_write_file(join_path(opts.out_dir, "defense/" + t.tag + "_distill_loss.csv"), loss_csv);
        manifest.artifact("defense/" + t.tag + "_distill_loss.csv");
    }
    manifest.note("teacher=models/clean.bdlm");
    manifest.finish();
}

// ---- phase: report -----------------------------------------------------------

void phase_report(const ExperimentConfig& cfg, const RunOptions& opts) {
    Manifest manifest(Phase::report, cfg, opts);
    ensure_directory(join_path(opts.out_dir, "report"));

    require_artifact(join_path(opts.out_dir, "data/val.bdld"));
    require_artifact(join_path(opts.out_dir, "data/test.bdld"));
    const Dataset val_ds = load_dataset(join_path(opts.out_dir, "data/val.bdld"), Split::val);
    const Dataset test_ds = load_dataset(join_path(opts.out_dir, "data/test.bdld"), Split::test);
    const Dataset sub = eval_subset(test_ds, cfg.attack.eval_count);

    const char* defense_names[3] = {"unlearn", "unlearn_alt", "distill"};

    std::vector<ReportRow> rows;
    for (const Tagged& t : tagged_models(cfg)) {
        require_artifact(join_path(opts.out_dir, "models/" + t.tag + ".bdlm"));
        require_artifact(join_path(opts.out_dir, "directions/" + t.tag + ".bdir"));
        const Network before = load_network<real_t>(join_path(opts.out_dir, "models/" + t.tag + ".bdlm"));
        const BackdoorDirection dir =
            load_direction(join_path(opts.out_dir, "directions/" + t.tag + ".bdir"));

        Network afters[3];
        for (int d = 0; d < 3; ++d) {
            const std::string rel = "defense/" + t.tag + "_" + defense_names[d] + ".bdlm";
            require_artifact(join_path(opts.out_dir, rel));
            afters[d] = load_network<real_t>(join_path(opts.out_dir, rel));
        }

        for (double eps : cfg.attack.epsilons) {
            // The attack phase already ran this exact configuration; reusing
            // its seed tag keeps the before-numbers consistent across phases.
            const AttackConfig fga_cfg = attack_config_from(
                cfg, AttackKind::fga, eps,
                seed_for(cfg, "atk_" + t.tag + "_fga_eps" + eps_label(eps)), /*record_trace=*/false);
            const BatchAttackResult before_run =
                batch_attack(before, sub, fga_cfg, &dir, t.spec.target_label, opts.threads);
            const AttackSummary hint{before_run.success_rate, before_run.mean_alignment};
            for (int d = 0; d < 3; ++d)
                rows.push_back(repair_report(before, afters[d], sub, val_ds, t.spec, dir,
                                             defense_names[d], fga_cfg, opts.threads, &hint));
        }
    }
    save_report_csv(rows, join_path(opts.out_dir, "report/report.csv"));
    manifest.artifact("report/report.csv");
    save_fixtures_csv(join_path(opts.out_dir, "report/fixtures.csv"));
    manifest.artifact("report/fixtures.csv");
    manifest.note("fixtures=full_scale_reference_only_never_asserted");

    // Perceptual scores for the original triggers, when the images are big
    // enough for the 11x11 SSIM window.
    if (cfg.data.height >= 11 && cfg.data.width >= 11) {
        std::string perceptual = csv_row({"attack", "mean_ssim", "n"});
        for (TriggerKind kind : cfg.trigger.kinds) {
            const TriggerSpec spec = trigger_from_config(cfg, kind);
            double sum = 0;
            for (const LabeledImage& s : sub.samples) sum += ssim(s.pixels, apply_trigger(s.pixels, spec));
            perceptual += csv_row({to_string(kind),
                                   fmt_real(sum / static_cast<double>(sub.samples.size())),
                                   std::to_string(sub.samples.size())});
        }
        atomic_write_file(join_path(opts.out_dir, "report/perceptual.csv"), perceptual);
        manifest.artifact("report/perceptual.csv");
    } else {
        manifest.note("ssim=skipped_images_below_11x11_window");
    }
    manifest.note("lpips=omitted_requires_pretrained_network");
    manifest.note("asr_excludes_target_class=1");
    manifest.finish();
}

}  // namespace

const char* to_string(Phase phase) {
    switch (phase) {
        case Phase::train: return "train";
        case Phase::probe: return "probe";
        case Phase::attack: return "attack";
        case Phase::defend: return "defend";
        case Phase::report: return "report";
    }
    return "unknown";
}

Phase parse_phase(const std::string& name) {
    for (Phase p : {Phase::train, Phase::probe, Phase::attack, Phase::defend, Phase::report})
        if (name == to_string(p)) return p;
    fail(ErrorKind::ConfigParseError, "unknown phase '" + name + "'");
}

TriggerSpec trigger_from_config(const ExperimentConfig& cfg, TriggerKind kind) {
    const TriggerSection& t = cfg.trigger;
    switch (kind) {
        case TriggerKind::badnets:
            return badnets_trigger(t.target, t.badnets_patch, Corner::bottom_right,
                                   static_cast<real_t>(t.badnets_value));
        case TriggerKind::blend:
            return blend_trigger(t.target, image_shape(cfg), derive_seed(cfg.seed, "blend_pattern"),
                                 static_cast<real_t>(t.blend_alpha));
        case TriggerKind::wanet:
            return wanet_trigger(t.target, derive_seed(cfg.seed, "wanet_warp"), t.wanet_grid,
                                 static_cast<real_t>(t.wanet_strength));
    }
    fail(ErrorKind::InvalidConfig, "unknown trigger kind");
}

Network make_model(const ExperimentConfig& cfg, std::uint64_t init_seed) {
    MicroNetConfig mc;
    mc.conv1_channels = cfg.model.conv1;
    mc.conv2_channels = cfg.model.conv2;
    Network net = make_micronet<real_t>(image_shape(cfg), cfg.data.classes, mc);
    init_params(net, init_seed);
    return net;
}

TrainConfig train_config_from(const ExperimentConfig& cfg, std::uint64_t seed, int threads) {
    TrainConfig tc;
    tc.epochs = cfg.train.epochs;
    tc.batch_size = cfg.train.batch;
    tc.lr = static_cast<real_t>(cfg.train.lr);
    tc.momentum = static_cast<real_t>(cfg.train.momentum);
    tc.weight_decay = static_cast<real_t>(cfg.train.weight_decay);
    tc.lr_decay_epochs = cfg.train.decay_epochs;
    tc.lr_decay_factor = static_cast<real_t>(cfg.train.decay_factor);
    tc.early_stop_patience = cfg.train.patience;
    tc.seed = seed;
    tc.threads = threads;
    return tc;
}

AttackConfig attack_config_from(const ExperimentConfig& cfg, AttackKind kind, double epsilon_255,
                                std::uint64_t seed, bool record_trace) {
    AttackConfig acfg;
    acfg.kind = kind;
    acfg.epsilon = static_cast<real_t>(epsilon_255 / 255.0);
    acfg.step_alpha = static_cast<real_t>(cfg.attack.step / 255.0);
    acfg.steps = kind == AttackKind::fga ? cfg.attack.fga_steps : cfg.attack.pgd_steps;
    acfg.beta = static_cast<real_t>(cfg.attack.beta);
    acfg.seed = seed;
    acfg.record_trace = record_trace;
    return acfg;
}

std::string model_tag(TriggerKind kind, double rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", rate * 100.0);
    return std::string(to_string(kind)) + "_r" + buf;
}

Dataset eval_subset(const Dataset& ds, int count) {
    validate_dataset(ds);
    if (count < 1) fail(ErrorKind::InvalidConfig, "eval_subset: count must be >= 1");
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        by_class[ds.samples[i].label].push_back(i);

    Dataset out;
    out.num_classes = ds.num_classes;
    out.split = ds.split;
    const std::size_t want = std::min<std::size_t>(count, ds.samples.size());
    for (std::size_t round = 0; out.samples.size() < want; ++round) {
        bool any = false;
        for (int c = 0; c < ds.num_classes && out.samples.size() < want; ++c) {
            if (round >= by_class[c].size()) continue;
            out.samples.push_back(ds.samples[by_class[c][round]]);
            any = true;
        }
        if (!any) break;
    }
    return out;
}

void run_phase(Phase phase, const ExperimentConfig& cfg, const RunOptions& opts) {
    validate_config(cfg);
    if (opts.threads < 1) fail(ErrorKind::InvalidConfig, "threads must be >= 1");
    ensure_directory(opts.out_dir);
    switch (phase) {
        case Phase::train: phase_train(cfg, opts); return;
        case Phase::probe: phase_probe(cfg, opts); return;
        case Phase::attack: phase_attack(cfg, opts); return;
        case Phase::defend: phase_defend(cfg, opts); return;
        case Phase::report: phase_report(cfg, opts); return;
    }
}

void run_all(const ExperimentConfig& cfg, const RunOptions& opts) {
    for (Phase p : {Phase::train, Phase::probe, Phase::attack, Phase::defend, Phase::report})
        run_phase(p, cfg, opts);
}

}  // namespace bdlab
