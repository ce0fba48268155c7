#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdlab/dataset.hpp"
#include "bdlab/network.hpp"
#include "bdlab/probe.hpp"

namespace bdlab {

enum class AttackKind { untargeted_pgd, targeted_pgd, fga };

inline const char* to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::untargeted_pgd: return "untargeted_pgd";
        case AttackKind::targeted_pgd: return "targeted_pgd";
        case AttackKind::fga: return "fga";
    }
    return "unknown";
}

struct AttackConfig {
    AttackKind kind = AttackKind::targeted_pgd;
    real_t epsilon = real_t(8.0 / 255.0);
    real_t step_alpha = real_t(2.0 / 255.0);
    int steps = 20;            // PGD baseline default; the guided attack runs 200
    real_t beta = real_t(1);   // feature-guidance weight, guided attack only
    real_t init_eta = real_t(-1);  // random-init magnitude; negative = use epsilon
    std::uint64_t seed = 0;
    bool record_trace = true;  // per-step success bookkeeping (extra forward per step)
};

struct AttackOutcome {
    Tensor x_adv;
    bool success = false;  // final iterate: == target (targeted/fga), != true label (untargeted)
    int prediction = -1;   // final predicted class
    double linf = 0;
    double align = 0;  // vs. the supplied direction; 0 when none given
    int steps_run = 0;
    int steps_to_success = -1;       // first step whose iterate succeeded; -1 = never
    std::vector<char> success_trace;  // [k] = ever succeeded within k+1 steps
};

// Sign-gradient ascent with l-inf ball projection and [0,1] clipping after
// every iterate, random init xi ~ U[-eta,eta]. The three kinds differ only in
// the objective; the guided kind with beta = 0 therefore reproduces targeted
// PGD bitwise under the same seed.
AttackOutcome pgd_untargeted(const Network& net, const Tensor& x, int y_true,
                             const AttackConfig& cfg);
AttackOutcome pgd_targeted(const Network& net, const Tensor& x, int y_target,
                           const AttackConfig& cfg);
// Requires a direction estimated on this exact network (provenance hash
// check), so repaired models can never be attacked with a stale direction.
AttackOutcome fga(const Network& net, const Tensor& x, int y_target,
                  const BackdoorDirection& dir, const AttackConfig& cfg);

struct BatchAttackResult {
    double success_rate = 0;
    double mean_alignment = 0;        // 0 when no direction was supplied
    std::vector<double> step_curve;   // [k] = fraction ever-successful within k+1 steps
    std::vector<AttackOutcome> outcomes;
    std::vector<int> sample_ids;      // aligned with outcomes
};

// Attacks every eligible sample of the dataset (targeted/fga skip samples
// already labeled the target, the same convention the trigger ASR uses) with
// per-sample seeds derived from cfg.seed. Deterministic for any thread count.
BatchAttackResult batch_attack(const Network& net, const Dataset& ds, const AttackConfig& cfg,
                               const BackdoorDirection* dir = nullptr, int target_label = 0,
                               int threads = 1);

// Predicted-class histogram over the adversarial inputs; sums to |outcomes|.
std::vector<int> label_distribution(const Network& net, const std::vector<AttackOutcome>& outcomes);

// CSV: sample_id, success, linf, alignment, steps_to_success.
void save_outcomes_csv(const BatchAttackResult& result, const std::string& path);

}  // namespace bdlab
