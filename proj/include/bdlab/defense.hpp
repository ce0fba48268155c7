#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "bdlab/attack.hpp"
#include "bdlab/dataset.hpp"
#include "bdlab/network.hpp"
#include "bdlab/probe.hpp"
#include "bdlab/train.hpp"
#include "bdlab/trigger.hpp"

namespace bdlab {

// One discovered alternative trigger: an adversarial input paired with the
// label the model SHOULD produce on it.
struct AdvExample {
    Tensor pixels;
    int true_label = 0;
    int id = 0;
};

// What the unlearning loop feeds into its fine-tuning stream: the original
// trigger (stamped onto clean samples on the fly) or a stored set of
// adversarial examples cycled through the stamped slots.
using UnlearnSource = std::variant<TriggerSpec, std::vector<AdvExample>>;

struct UnlearnConfig {
    int epochs = 5;
    double triggered_fraction = 0.10;  // of each epoch's samples; in (0,1]
    TrainConfig optim;  // lr/momentum/weight_decay/batch_size/threads reused; lr stays fixed
    std::uint64_t seed = 0;
};

// Trigger-aware unlearning: fine-tunes on clean data with triggered_fraction
// of each epoch's slots replaced by triggered (or adversarial) samples that
// keep their TRUE labels, teaching the model to ignore the trigger. The
// epochs = 0 call returns the network unchanged bitwise.
Network unlearn_trigger(const Network& net, const Dataset& clean_train, const UnlearnSource& source,
                        const UnlearnConfig& cfg);

// Attention map over a C,H,W activation: per-position sum of squared channel
// values, L2-normalized over the spatial grid, so the map has unit norm for
// any nonzero activation. An all-zero activation yields the all-zero map
// instead of dividing by zero.
template <typename T>
TensorT<T> attention_map(const TensorT<T>& features) {
    if (features.shape().size() != 3)
        fail(ErrorKind::ShapeMismatch,
             "attention_map: need a C,H,W activation, got " + shape_to_string(features.shape()));
    const int h = features.shape()[1];
    const int w = features.shape()[2];
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    TensorT<T> map({h, w});
    for (int c = 0; c < features.shape()[0]; ++c) {
        const std::size_t base = static_cast<std::size_t>(c) * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            const T a = features[base + p];
            map[p] += a * a;
        }
    }
    double norm2 = 0;
    for (std::size_t p = 0; p < plane; ++p)
        norm2 += static_cast<double>(map[p]) * static_cast<double>(map[p]);
    const double norm = std::sqrt(norm2);
    if (norm < 1e-12) return TensorT<T>({h, w});
    const T inv = static_cast<T>(1.0 / norm);
    for (std::size_t p = 0; p < plane; ++p) map[p] *= inv;
    return map;
}

// Gradient of a scalar loss with respect to `features` given its gradient
// with respect to attention_map(features). Recomputes the normalization from
// the raw activation, and mirrors the forward zero guard with a zero
// gradient (the map is constant there).
template <typename T>
TensorT<T> attention_backward(const TensorT<T>& features, const TensorT<T>& dmap) {
    if (features.shape().size() != 3)
        fail(ErrorKind::ShapeMismatch, "attention_backward: need a C,H,W activation");
    const int channels = features.shape()[0];
    const int h = features.shape()[1];
    const int w = features.shape()[2];
    dmap.require_shape({h, w}, "attention_backward");
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);

    TensorT<T> raw({h, w});
    for (int c = 0; c < channels; ++c) {
        const std::size_t base = static_cast<std::size_t>(c) * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            const T a = features[base + p];
            raw[p] += a * a;
        }
    }
    double norm2 = 0;
    for (std::size_t p = 0; p < plane; ++p)
        norm2 += static_cast<double>(raw[p]) * static_cast<double>(raw[p]);
    const double norm = std::sqrt(norm2);
    TensorT<T> out(features.shape());
    if (norm < 1e-12) return out;

    // A = M/||M||, so dL/dM = (dL/dA - <dL/dA, A> A) / ||M||, and each raw
    // entry M_p = sum_c a_cp^2 contributes dM_p/da_cp = 2 a_cp.
    const T inv = static_cast<T>(1.0 / norm);
    double g_dot_a = 0;
    for (std::size_t p = 0; p < plane; ++p)
        g_dot_a += static_cast<double>(dmap[p]) * static_cast<double>(raw[p] * inv);
    TensorT<T> dm({h, w});
    for (std::size_t p = 0; p < plane; ++p)
        dm[p] = (dmap[p] - static_cast<T>(g_dot_a) * (raw[p] * inv)) * inv;
    for (int c = 0; c < channels; ++c) {
        const std::size_t base = static_cast<std::size_t>(c) * plane;
        for (std::size_t p = 0; p < plane; ++p)
            out[base + p] = dm[p] * T(2) * features[base + p];
    }
    return out;
}

// The relu layers with 3-D outputs — one per conv block on the micronet
// preset, which is where the distillation aligns attention.
std::vector<int> default_attention_tags(const Network& net);

struct DistillConfig {
    double lambda_attn = 0.5;
    int epochs = 10;
    std::vector<int> attn_layers;  // empty = default_attention_tags(student)
    TrainConfig optim;             // fixed-lr fine-tuning, like unlearning
    std::uint64_t seed = 0;
};

struct DistillResult {
    Network net;
    std::vector<double> epoch_loss;  // mean (CE + lambda * attention) per epoch
};

// Attention-distillation repair: fine-tunes the student on clean data against
//   CE(student(x), y) + lambda * sum_layers ||A_student - A_teacher||_2^2
// with the teacher frozen. lambda = 0 skips the attention terms entirely, so
// it reproduces plain clean fine-tuning bitwise.
DistillResult distill_repair(const Network& student, const Network& teacher,
                             const Dataset& clean_subset, const DistillConfig& cfg);

// Before/after numbers for one (defense, trigger, epsilon) cell. "attack"
// names the trigger family whose backdoor the defense tried to remove.
struct ReportRow {
    std::string defense;
    std::string attack;
    double epsilon = 0;
    double acc_before = 0, acc_after = 0;
    double asr_orig_before = 0, asr_orig_after = 0;
    double fga_before = 0, fga_after = 0;
    double align_before = 0, align_after = 0;
};

// Pre-defense guided-attack numbers, reusable across defenses that repair the
// same backdoored model (the "before" side never changes).
struct AttackSummary {
    double success = 0;
    double align = 0;
};

// Scores both models on eval_ds (accuracy, original-trigger ASR, guided
// attack) and re-estimates the backdoor direction on the repaired model from
// direction_ds — the stale pre-defense direction is never reused. dir_before
// must carry the provenance hash of `before`, and both networks must share an
// architecture; anything else is a lineage error.
ReportRow repair_report(const Network& before, const Network& after, const Dataset& eval_ds,
                        const Dataset& direction_ds, const TriggerSpec& spec,
                        const BackdoorDirection& dir_before, const std::string& defense_name,
                        const AttackConfig& fga_cfg, int threads = 1,
                        const AttackSummary* before_hint = nullptr);

// CSV: defense, attack, epsilon, acc_before, acc_after, asr_orig_before,
// asr_orig_after, fga_before, fga_after, align_before, align_after.
void save_report_csv(const std::vector<ReportRow>& rows, const std::string& path);

}  // namespace bdlab
