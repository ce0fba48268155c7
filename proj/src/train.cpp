#include "bdlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bdlab/io.hpp"
#include "bdlab/parallel.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

namespace {

void validate_train_config(const TrainConfig& cfg) {
    // lr = 0 is allowed as the degenerate "no step" mode used by tests.
    if (cfg.lr < real_t(0)) fail(ErrorKind::InvalidConfig, "train: lr must be >= 0");
    if (cfg.momentum < real_t(0) || cfg.momentum >= real_t(1))
        fail(ErrorKind::InvalidConfig, "train: momentum must lie in [0,1)");
    if (cfg.epochs < 1) fail(ErrorKind::InvalidConfig, "train: epochs must be >= 1");
    if (cfg.batch_size < 1) fail(ErrorKind::InvalidConfig, "train: batch_size must be >= 1");
    if (cfg.early_stop_patience < 1) fail(ErrorKind::InvalidConfig, "train: patience must be >= 1");
}

}  // namespace

void check_compatible(const Network& net, const Dataset& ds, const char* where) {
    validate_dataset(ds);
    if (ds.image_shape() != net.input_shape)
        fail(ErrorKind::ShapeMismatch, std::string(where) + ": dataset images " +
                                           shape_to_string(ds.image_shape()) +
                                           " do not match network input " +
                                           shape_to_string(net.input_shape));
    if (ds.num_classes != net.num_classes)
        fail(ErrorKind::ShapeMismatch, std::string(where) + ": dataset classes " +
                                           std::to_string(ds.num_classes) +
                                           " do not match network classes " +
                                           std::to_string(net.num_classes));
}

SgdState make_sgd_state(const Network& net) {
    SgdState m;
    m.weight_velocity.resize(net.layers.size());
    m.bias_velocity.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!net.layers[i].has_params()) continue;
        m.weight_velocity[i] = Tensor(net.layers[i].weight.shape());
        m.bias_velocity[i] = Tensor(net.layers[i].bias.shape());
    }
    return m;
}

void sgd_step(Network& net, SgdState& state, const std::vector<ParamGrads>& grads, real_t lr,
              real_t momentum, real_t weight_decay) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& layer = net.layers[i];
        if (!layer.has_params()) continue;
        for (std::size_t j = 0; j < layer.weight.size(); ++j) {
            const real_t g = grads[i].weight[j] + weight_decay * layer.weight[j];
            state.weight_velocity[i][j] = momentum * state.weight_velocity[i][j] + g;
            layer.weight[j] -= lr * state.weight_velocity[i][j];
        }
        for (std::size_t j = 0; j < layer.bias.size(); ++j) {
            state.bias_velocity[i][j] = momentum * state.bias_velocity[i][j] + grads[i].bias[j];
            layer.bias[j] -= lr * state.bias_velocity[i][j];
        }
    }
}

BatchGrads reduce_param_grads(const Network& net, const std::vector<BackwardResult>& slots) {
    BatchGrads out;
    out.grads.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!net.layers[i].has_params()) continue;
        out.grads[i].weight = Tensor(net.layers[i].weight.shape());
        out.grads[i].bias = Tensor(net.layers[i].bias.shape());
    }
    for (const auto& slot : slots) {
        out.loss_sum += slot.loss;
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            if (!net.layers[i].has_params()) continue;
            const auto& pg = slot.param_grads[i];
            for (std::size_t j = 0; j < pg.weight.size(); ++j) out.grads[i].weight[j] += pg.weight[j];
            for (std::size_t j = 0; j < pg.bias.size(); ++j) out.grads[i].bias[j] += pg.bias[j];
        }
    }
    const real_t inv = real_t(1) / static_cast<real_t>(slots.size());
    for (auto& g : out.grads) {
        for (std::size_t j = 0; j < g.weight.size(); ++j) g.weight[j] *= inv;
        for (std::size_t j = 0; j < g.bias.size(); ++j) g.bias[j] *= inv;
    }
    return out;
}

std::pair<Network, TrainHistory> train(const Network& net, const Dataset& train_ds,
                                       const Dataset& val_ds, const TrainConfig& cfg,
                                       const TriggerSpec* monitor_trigger) {
    validate_train_config(cfg);
    check_compatible(net, train_ds, "train");
    check_compatible(net, val_ds, "train(val)");

    Network model = net;
    SgdState mom = make_sgd_state(model);
    TrainHistory history;
    Rng rng(cfg.seed);

    std::vector<std::size_t> order(train_ds.samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    Network best = model;
    double best_acc = -1.0;
    int best_epoch = 0;
    int stale_epochs = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        real_t lr = cfg.lr;
        for (int decay_at : cfg.lr_decay_epochs)
            if (epoch >= decay_at) lr *= cfg.lr_decay_factor;

        rng.shuffle(order);
        double loss_sum = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);

            // Per-sample gradients land in slots; the reduction below walks
            // them in index order so the thread count never changes a byte.
            std::vector<BackwardResult> slots(count);
            parallel_for(count, cfg.threads, [&](std::size_t k) {
                const LabeledImage& s = train_ds.samples[order[start + k]];
                const auto acts = forward_all(model, s.pixels);
                auto [loss, dlogits] = softmax_cross_entropy(acts.back(), s.label);
                slots[k] = backward_network(model, s.pixels, acts, std::move(dlogits), {}, true);
                slots[k].loss = loss;
            });

            BatchGrads batch = reduce_param_grads(model, slots);
            if (!std::isfinite(batch.loss_sum))
                fail(ErrorKind::DivergedLoss, "train: non-finite loss in epoch " + std::to_string(epoch));
            sgd_step(model, mom, batch.grads, lr, cfg.momentum, cfg.weight_decay);
            loss_sum += batch.loss_sum;
        }

        history.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
        const double acc = evaluate_accuracy(model, val_ds, cfg.threads);
        history.val_acc.push_back(acc);
        if (monitor_trigger)
            history.val_asr.push_back(attack_success_rate(model, val_ds, *monitor_trigger, cfg.threads));

        if (acc > best_acc) {
            best_acc = acc;
            best = model;
            best_epoch = epoch;
            stale_epochs = 0;
        } else if (++stale_epochs >= cfg.early_stop_patience) {
            break;
        }
    }

    history.best_epoch = best_epoch;
    return {std::move(best), std::move(history)};
}

double evaluate_accuracy(const Network& net, const Dataset& ds, int threads) {
    check_compatible(net, ds, "evaluate_accuracy");
    if (ds.samples.empty()) fail(ErrorKind::EmptyEvaluationSet, "evaluate_accuracy: no samples");
    std::vector<char> hit(ds.samples.size());
    parallel_for(ds.samples.size(), threads, [&](std::size_t i) {
        hit[i] = predict(net, ds.samples[i].pixels) == ds.samples[i].label;
    });
    std::size_t correct = 0;
    for (char h : hit) correct += h;
    return static_cast<double>(correct) / static_cast<double>(ds.samples.size());
}

double attack_success_rate(const Network& net, const Dataset& ds, const TriggerSpec& spec,
                           int threads) {
    check_compatible(net, ds, "attack_success_rate");
    validate_trigger(spec, ds.image_shape());
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        if (ds.samples[i].label != spec.target_label) eligible.push_back(i);
    if (eligible.empty())
        fail(ErrorKind::EmptyEvaluationSet, "attack_success_rate: every sample is already the target class");
    std::vector<char> hit(eligible.size());
    parallel_for(eligible.size(), threads, [&](std::size_t k) {
        const Tensor triggered = apply_trigger(ds.samples[eligible[k]].pixels, spec);
        hit[k] = predict(net, triggered) == spec.target_label;
    });
    std::size_t flipped = 0;
    for (char h : hit) flipped += h;
    return static_cast<double>(flipped) / static_cast<double>(eligible.size());
}

void save_history_csv(const TrainHistory& history, const std::string& path) {
    std::string out = csv_row({"epoch", "train_loss", "val_acc", "val_asr"});
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        const std::string asr = e < history.val_asr.size() ? fmt_real(history.val_asr[e]) : "";
        out += csv_row({std::to_string(e + 1), fmt_real(history.train_loss[e]),
                        fmt_real(history.val_acc[e]), asr});
    }
    atomic_write_file(path, out);
}

}  // namespace bdlab
