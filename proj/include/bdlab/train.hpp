#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bdlab/dataset.hpp"
#include "bdlab/network.hpp"
#include "bdlab/trigger.hpp"

namespace bdlab {

struct TrainConfig {
    int epochs = 20;  // upper bound; early stopping may end sooner
    int batch_size = 32;
    real_t lr = real_t(0.01);
    real_t momentum = real_t(0.9);
    real_t weight_decay = real_t(5e-4);       // L2 on conv/linear weights, never biases
    std::vector<int> lr_decay_epochs = {10, 15};  // 1-based epochs where lr shrinks
    real_t lr_decay_factor = real_t(0.1);
    int early_stop_patience = 5;  // epochs without val-accuracy improvement
    std::uint64_t seed = 0;
    int threads = 1;
};

struct TrainHistory {
    std::vector<double> train_loss;  // mean CE per epoch actually run
    std::vector<double> val_acc;
    std::vector<double> val_asr;  // filled only when a monitor trigger is given
    int best_epoch = 0;           // 1-based epoch of the returned checkpoint
};

// SGD with momentum; returns the best-validation-accuracy checkpoint. Fully
// deterministic given the seed: fixed shuffle order and fixed per-batch
// reduction order, independent of the thread count.
std::pair<Network, TrainHistory> train(const Network& net, const Dataset& train_ds,
                                       const Dataset& val_ds, const TrainConfig& cfg,
                                       const TriggerSpec* monitor_trigger = nullptr);

// Fails with ShapeMismatch unless the dataset matches the network's input
// shape and class count.
void check_compatible(const Network& net, const Dataset& ds, const char* where);

// Momentum buffers aligned with net.layers (empty tensors for param-free
// layers). Shared by the trainer and the defense fine-tuners so every loop
// steps parameters identically.
struct SgdState {
    std::vector<Tensor> weight_velocity;
    std::vector<Tensor> bias_velocity;
};

SgdState make_sgd_state(const Network& net);

// One step from already batch-averaged gradients: decay on weights only (the
// g + wd*w form, so the velocity carries the decay), never on biases.
void sgd_step(Network& net, SgdState& state, const std::vector<ParamGrads>& grads, real_t lr,
              real_t momentum, real_t weight_decay);

// Batch-averaged parameter gradients plus the summed loss, reduced from
// per-sample backward slots in index order (thread-count invariant).
struct BatchGrads {
    std::vector<ParamGrads> grads;
    double loss_sum = 0;
};

BatchGrads reduce_param_grads(const Network& net, const std::vector<BackwardResult>& slots);

// Fraction of samples with argmax(f(x)) == label.
double evaluate_accuracy(const Network& net, const Dataset& ds, int threads = 1);

// Fraction of samples with true label != target that the trigger flips to the
// target. Target-class samples are excluded — counting them would inflate the
// rate for free.
double attack_success_rate(const Network& net, const Dataset& ds, const TriggerSpec& spec,
                           int threads = 1);

// CSV: epoch, train_loss, val_acc, val_asr (val_asr blank when unmonitored).
void save_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace bdlab
