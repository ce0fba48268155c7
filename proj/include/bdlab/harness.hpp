#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdlab/attack.hpp"
#include "bdlab/config.hpp"
#include "bdlab/defense.hpp"

namespace bdlab {

inline constexpr const char* kToolVersion = "0.1.0";

// The pipeline's five phases. Each one reads the artifacts of the phases
// before it from the output directory and writes its own under a fixed
// layout (documented in the README), plus a manifest_<phase>.txt recording
// config hash, timings, notes, and every artifact written. Phases are
// idempotent: re-running one with the same config and seed overwrites its
// outputs with identical bytes (manifests differ only in timings).
enum class Phase { train, probe, attack, defend, report };

const char* to_string(Phase phase);
Phase parse_phase(const std::string& name);  // ConfigParseError on unknown names

struct RunOptions {
    std::string out_dir = "out";
    int threads = 1;
};

// ---- config-derived builders, shared with the tests -------------------------

// The trigger a config describes for one kind. Blend patterns and warp fields
// derive from the root seed, so every phase reconstructs the same trigger.
TriggerSpec trigger_from_config(const ExperimentConfig& cfg, TriggerKind kind);

// Freshly initialized preset network (He init from the given seed).
Network make_model(const ExperimentConfig& cfg, std::uint64_t init_seed);

TrainConfig train_config_from(const ExperimentConfig& cfg, std::uint64_t seed, int threads);

AttackConfig attack_config_from(const ExperimentConfig& cfg, AttackKind kind, double epsilon_255,
                                std::uint64_t seed, bool record_trace = true);

// "badnets_r10" for (badnets, 0.10): the name every artifact of that
// poisoned model carries.
std::string model_tag(TriggerKind kind, double rate);

// Deterministic evaluation subset: samples drawn round-robin across classes
// in dataset order until `count` are collected, so no class dominates and
// every phase scores the same samples.
Dataset eval_subset(const Dataset& ds, int count);

// ---- phases ------------------------------------------------------------------

void run_phase(Phase phase, const ExperimentConfig& cfg, const RunOptions& opts);

// train → probe → attack → defend → report.
void run_all(const ExperimentConfig& cfg, const RunOptions& opts);

}  // namespace bdlab
