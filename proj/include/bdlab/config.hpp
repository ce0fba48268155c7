#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdlab/dataset.hpp"
#include "bdlab/trigger.hpp"

namespace bdlab {

// Whole-experiment configuration, parsed from a sectioned key=value file.
// Everything the pipeline consumes is a named key here; the only inputs it
// does not cover are the CLI-level --out directory and --threads count, which
// change where results land and how fast they appear but never their bytes.

struct DataSection {
    int classes = 4;
    int per_class = 150;       // train split
    int val_per_class = 40;
    int test_per_class = 40;
    int channels = 3;
    int height = 8;
    int width = 8;
    SynthTuning tune;          // synthetic-set knobs, one key per field
};

struct ModelSection {
    std::string preset = "micronet";
    int conv1 = 8;
    int conv2 = 16;
};

struct TriggerSection {
    std::vector<TriggerKind> kinds = {TriggerKind::badnets, TriggerKind::blend, TriggerKind::wanet};
    int target = 0;
    int badnets_patch = 3;
    double badnets_value = 1.0;
    double blend_alpha = 0.2;
    int wanet_grid = 4;
    double wanet_strength = 0.5;
};

struct PoisonSection {
    std::vector<double> rates = {0.05, 0.10};
};

struct TrainSection {
    int epochs = 20;
    int batch = 32;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::vector<int> decay_epochs = {10, 15};
    double decay_factor = 0.1;
    int patience = 5;
};

struct AttackSection {
    std::vector<double> epsilons = {8, 16, 32};  // in 1/255 units
    double step = 2;                             // in 1/255 units
    int pgd_steps = 20;
    int fga_steps = 200;
    double beta = 1.0;
    std::vector<double> betas = {0, 0.1, 1, 10};  // guidance sweep for the figures
    int eval_count = 40;                          // test samples per batch attack
};

struct DefenseSection {
    int unlearn_epochs = 5;
    double triggered_fraction = 0.10;
    int distill_epochs = 10;
    double lambda = 0.5;
    double finetune_lr = 0.01;
};

struct ExperimentConfig {
    DataSection data;
    ModelSection model;
    TriggerSection trigger;
    PoisonSection poison;
    TrainSection train;
    AttackSection attack;
    DefenseSection defense;
    std::uint64_t seed = 7;  // single root seed; every phase derives from it
};

// Strict parser: unknown sections or keys, malformed numbers, and duplicate
// keys are all ConfigParseError. '#' starts a comment, blank lines are
// skipped, '[section]' headers scope the keys that follow.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Applies one "section.key=value" override (the CLI's --phase-override) with
// the same strictness as the parser. Runs before hashing, so overridden runs
// hash differently from their base config.
void apply_override(ExperimentConfig& cfg, const std::string& spec);

// Semantic validation beyond syntax: class counts, positive epsilons, rates
// inside (0,1), known presets. InvalidConfig on violation.
void validate_config(const ExperimentConfig& cfg);

// Fixed-order, fixed-format rendering of every semantic key. Parsing it back
// reproduces the config exactly, and its FNV-1a hash is the experiment's
// stable identity across platforms.
std::string canonical_config_text(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);  // 16 hex chars

}  // namespace bdlab
