#include "bdlab/attack.hpp"

#include <algorithm>
#include <cmath>

#include "bdlab/io.hpp"
#include "bdlab/parallel.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

namespace {

void validate_attack_config(const AttackConfig& cfg) {
    if (cfg.epsilon < real_t(0)) fail(ErrorKind::InvalidConfig, "attack: epsilon must be >= 0");
    if (cfg.steps < 0) fail(ErrorKind::InvalidConfig, "attack: steps must be >= 0");
    if (cfg.steps > 0 && !(cfg.step_alpha > real_t(0)))
        fail(ErrorKind::InvalidConfig, "attack: step_alpha must be > 0 when steps > 0");
    if (cfg.kind == AttackKind::fga && cfg.beta < real_t(0))
        fail(ErrorKind::InvalidConfig, "attack: beta must be >= 0");
}

void check_fga_direction(const Network& net, const BackdoorDirection& dir) {
    if (dir.layer_tag != net.feature_tap || dir.d.size() != static_cast<std::size_t>(net.feature_dim()))
        fail(ErrorKind::ShapeMismatch, "fga: direction does not fit this network's feature tap");
    double norm2 = 0;
    for (std::size_t j = 0; j < dir.d.size(); ++j)
        norm2 += static_cast<double>(dir.d[j]) * static_cast<double>(dir.d[j]);
    if (std::sqrt(norm2) < 1e-9) fail(ErrorKind::DegenerateDirection, "fga: direction has zero norm");
    if (dir.model_hash != network_hash(net))
        fail(ErrorKind::LineageMismatch,
             "fga: direction was estimated on a different network (hash " + dir.model_hash +
                 "); re-estimate it on this model");
}

// Project back onto the epsilon-ball around x, then into the pixel box. Both
// run after the init and after every step, so no intermediate iterate ever
// escapes.
void project(const Tensor& x, real_t epsilon, Tensor& cur) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const real_t delta = std::clamp(cur[i] - x[i], -epsilon, epsilon);
        cur[i] = std::clamp(x[i] + delta, real_t(0), real_t(1));
    }
}

// One attack, any kind. `label` is the true label for untargeted runs and the
// target label otherwise; `dir` feeds the guided objective and the alignment
// diagnostic (optional for the PGD kinds).
AttackOutcome run_attack(const Network& net, const Tensor& x, int label, const AttackConfig& cfg,
                         const BackdoorDirection* dir) {
    validate_attack_config(cfg);
    x.require_shape(net.input_shape, "attack");

    ObjectiveSpec objective;
    switch (cfg.kind) {
        case AttackKind::untargeted_pgd: objective = ObjectiveSpec::ce_toward(label); break;
        case AttackKind::targeted_pgd: objective = ObjectiveSpec::negative_ce_toward(label); break;
        case AttackKind::fga:
            objective = ObjectiveSpec::guided(label, dir->d, cfg.beta);
            break;
    }
    const auto succeeded = [&](int pred) {
        return cfg.kind == AttackKind::untargeted_pgd ? pred != label : pred == label;
    };

    const real_t eta = cfg.init_eta < real_t(0) ? cfg.epsilon : cfg.init_eta;
    Rng rng(cfg.seed);
    Tensor cur = x;
    for (std::size_t i = 0; i < cur.size(); ++i)
        cur[i] += static_cast<real_t>(rng.uniform(-static_cast<double>(eta), static_cast<double>(eta)));
    project(x, cfg.epsilon, cur);

    AttackOutcome out;
    out.steps_run = cfg.steps;
    if (cfg.record_trace) {
        out.success_trace.reserve(cfg.steps);
        if (succeeded(predict(net, cur))) out.steps_to_success = 0;
    }

    bool ever = out.steps_to_success == 0;
    for (int k = 1; k <= cfg.steps; ++k) {
        const Tensor grad = input_gradient(net, cur, objective);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            if (grad[i] > real_t(0))
                cur[i] += cfg.step_alpha;
            else if (grad[i] < real_t(0))
                cur[i] -= cfg.step_alpha;
        }
        project(x, cfg.epsilon, cur);
        if (cfg.record_trace) {
            if (succeeded(predict(net, cur))) {
                if (out.steps_to_success < 0) out.steps_to_success = k;
                ever = true;
            }
            out.success_trace.push_back(ever);
        }
    }

    out.prediction = predict(net, cur);
    out.success = succeeded(out.prediction);
    out.linf = linf_diff(cur, x);
    if (dir) out.align = alignment(net, x, cur, *dir);
    out.x_adv = std::move(cur);
    return out;
}

}  // namespace

AttackOutcome pgd_untargeted(const Network& net, const Tensor& x, int y_true,
                             const AttackConfig& cfg) {
    if (cfg.kind != AttackKind::untargeted_pgd)
        fail(ErrorKind::InvalidConfig, "pgd_untargeted called with a different attack kind");
    return run_attack(net, x, y_true, cfg, nullptr);
}

AttackOutcome pgd_targeted(const Network& net, const Tensor& x, int y_target,
                           const AttackConfig& cfg) {
    if (cfg.kind != AttackKind::targeted_pgd)
        fail(ErrorKind::InvalidConfig, "pgd_targeted called with a different attack kind");
    return run_attack(net, x, y_target, cfg, nullptr);
}

AttackOutcome fga(const Network& net, const Tensor& x, int y_target, const BackdoorDirection& dir,
                  const AttackConfig& cfg) {
    if (cfg.kind != AttackKind::fga)
        fail(ErrorKind::InvalidConfig, "fga called with a different attack kind");
    check_fga_direction(net, dir);
    return run_attack(net, x, y_target, cfg, &dir);
}

BatchAttackResult batch_attack(const Network& net, const Dataset& ds, const AttackConfig& cfg,
                               const BackdoorDirection* dir, int target_label, int threads) {
    validate_attack_config(cfg);
    validate_dataset(ds);
    if (ds.image_shape() != net.input_shape)
        fail(ErrorKind::ShapeMismatch, "batch_attack: dataset does not match network input");
    if (cfg.kind == AttackKind::fga) {
        if (!dir) fail(ErrorKind::InvalidConfig, "batch_attack: the guided attack needs a direction");
        check_fga_direction(net, *dir);
    }
    const int target = dir ? dir->target_label : target_label;

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (cfg.kind == AttackKind::untargeted_pgd || ds.samples[i].label != target)
            eligible.push_back(i);
    }
    if (eligible.empty())
        fail(ErrorKind::EmptyEvaluationSet, "batch_attack: every sample is already the target class");

    BatchAttackResult result;
    result.outcomes.resize(eligible.size());
    result.sample_ids.resize(eligible.size());
    parallel_for(eligible.size(), threads, [&](std::size_t k) {
        const LabeledImage& s = ds.samples[eligible[k]];
        AttackConfig per = cfg;
        per.seed = derive_seed(cfg.seed, "attack", static_cast<std::uint64_t>(s.id));
        const int label = cfg.kind == AttackKind::untargeted_pgd ? s.label : target;
        result.outcomes[k] = run_attack(net, s.pixels, label, per, dir);
        result.sample_ids[k] = s.id;
    });

    std::size_t wins = 0;
    double align_sum = 0;
    for (const auto& o : result.outcomes) {
        wins += o.success;
        align_sum += o.align;
    }
    result.success_rate = static_cast<double>(wins) / static_cast<double>(result.outcomes.size());
    result.mean_alignment = dir ? align_sum / static_cast<double>(result.outcomes.size()) : 0.0;

    if (cfg.record_trace && cfg.steps > 0) {
        result.step_curve.assign(cfg.steps, 0.0);
        for (const auto& o : result.outcomes)
            for (int k = 0; k < cfg.steps; ++k) result.step_curve[k] += o.success_trace[k];
        for (double& v : result.step_curve) v /= static_cast<double>(result.outcomes.size());
    }
    return result;
}

std::vector<int> label_distribution(const Network& net, const std::vector<AttackOutcome>& outcomes) {
    std::vector<int> histogram(net.num_classes, 0);
    for (const auto& o : outcomes) ++histogram[predict(net, o.x_adv)];
    return histogram;
}

void save_outcomes_csv(const BatchAttackResult& result, const std::string& path) {
    std::string out = csv_row({"sample_id", "success", "linf", "alignment", "steps_to_success"});
    for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
        const auto& o = result.outcomes[i];
        out += csv_row({std::to_string(result.sample_ids[i]), std::to_string(o.success ? 1 : 0),
                        fmt_real(o.linf), fmt_real(o.align), std::to_string(o.steps_to_success)});
    }
    atomic_write_file(path, out);
}

}  // namespace bdlab
