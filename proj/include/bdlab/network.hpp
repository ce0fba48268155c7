#pragma once

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "bdlab/io.hpp"
#include "bdlab/layers.hpp"
#include "bdlab/loss.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

// Classifier f = g ∘ φ. The feature tap is the index of the layer whose
// OUTPUT is the feature vector φ(x); everything after it is the head g,
// which must end in a linear layer producing num_classes logits.
template <typename T>
struct NetworkT {
    Shape input_shape;  // C,H,W
    int num_classes = 0;
    int feature_tap = -1;
    std::vector<LayerT<T>> layers;

    int feature_dim() const { return layers[feature_tap].out_shape[0]; }
};

template <typename T>
void validate_network(const NetworkT<T>& net) {
    if (net.layers.empty()) fail(ErrorKind::InvalidConfig, "network has no layers");
    if (net.feature_tap < 0 || net.feature_tap >= static_cast<int>(net.layers.size()))
        fail(ErrorKind::InvalidConfig, "feature_tap out of range");
    if (net.layers[net.feature_tap].out_shape.size() != 1)
        fail(ErrorKind::InvalidConfig, "feature tap must sit after a flatten/pool producing a flat vector");
    const LayerT<T>& last = net.layers.back();
    if (last.kind != LayerKind::linear || last.out_dim != net.num_classes)
        fail(ErrorKind::InvalidConfig, "network head must end in a linear layer with num_classes outputs");
}

// Assembles a network by wiring layer shapes front to back. Parameters start
// at zero; call init_params for the usual random initialization.
template <typename T>
NetworkT<T> assemble_network(Shape input_shape, int num_classes, int feature_tap,
                             std::vector<LayerT<T>> layers) {
    NetworkT<T> net;
    net.input_shape = std::move(input_shape);
    net.num_classes = num_classes;
    net.feature_tap = feature_tap;
    net.layers = std::move(layers);
    Shape shape = net.input_shape;
    for (auto& layer : net.layers) {
        wire_layer(layer, shape);
        shape = layer.out_shape;
    }
    validate_network(net);
    return net;
}

// He-normal weights, zero biases; fully deterministic given the seed.
template <typename T>
void init_params(NetworkT<T>& net, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : net.layers) {
        if (!layer.has_params()) continue;
        std::size_t fan_in = 1;
        if (layer.kind == LayerKind::conv2d)
            fan_in = static_cast<std::size_t>(layer.in_shape[0]) * layer.kernel * layer.kernel;
        else
            fan_in = static_cast<std::size_t>(layer.in_shape[0]);
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            layer.weight[i] = static_cast<T>(scale * rng.normal());
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] = T(0);
    }
}

// Desk-scale preset: conv(8,3x3,pad 1) → relu → conv(16,3x3,stride 2,pad 1) →
// relu → global_avg_pool → flatten → linear(m), feature tap after flatten
// (d = conv2_channels). Valid for any input of at least 8x8 and m >= 2.
struct MicroNetConfig {
    int conv1_channels = 8;
    int conv2_channels = 16;
    int kernel = 3;
};

template <typename T>
NetworkT<T> make_micronet(const Shape& input_shape, int num_classes,
                          const MicroNetConfig& cfg = {}) {
    if (input_shape.size() != 3 || input_shape[1] < 8 || input_shape[2] < 8)
        fail(ErrorKind::InvalidConfig, "micronet needs a C,H,W input of at least 8x8");
    if (num_classes < 2) fail(ErrorKind::InvalidConfig, "micronet needs at least 2 classes");
    std::vector<LayerT<T>> layers;
    layers.push_back(make_conv2d<T>(cfg.conv1_channels, cfg.kernel, 1, 1));
    layers.push_back(make_relu<T>());
    layers.push_back(make_conv2d<T>(cfg.conv2_channels, cfg.kernel, 2, 1));
    layers.push_back(make_relu<T>());
    layers.push_back(make_global_avg_pool<T>());
    layers.push_back(make_flatten<T>());
    layers.push_back(make_linear<T>(num_classes));
    return assemble_network<T>(input_shape, num_classes, 5, std::move(layers));
}

template <typename T>
TensorT<T> forward(const NetworkT<T>& net, const TensorT<T>& x) {
    x.require_shape(net.input_shape, "forward");
    TensorT<T> act = x;
    for (const auto& layer : net.layers) act = forward_layer(layer, act);
    return act;
}

// All intermediate activations; acts[i] is the output of layers[i].
template <typename T>
std::vector<TensorT<T>> forward_all(const NetworkT<T>& net, const TensorT<T>& x) {
    x.require_shape(net.input_shape, "forward_all");
    std::vector<TensorT<T>> acts;
    acts.reserve(net.layers.size());
    const TensorT<T>* cur = &x;
    for (const auto& layer : net.layers) {
        acts.push_back(forward_layer(layer, *cur));
        cur = &acts.back();
    }
    return acts;
}

template <typename T>
TensorT<T> features_at(const NetworkT<T>& net, const TensorT<T>& x) {
    x.require_shape(net.input_shape, "features_at");
    TensorT<T> act = x;
    for (int i = 0; i <= net.feature_tap; ++i) act = forward_layer(net.layers[i], act);
    return act;
}

template <typename T>
TensorT<T> head_forward(const NetworkT<T>& net, const TensorT<T>& z) {
    z.require_shape(net.layers[net.feature_tap].out_shape, "head_forward");
    TensorT<T> act = z;
    for (std::size_t i = net.feature_tap + 1; i < net.layers.size(); ++i)
        act = forward_layer(net.layers[i], act);
    return act;
}

template <typename T>
TensorT<T> head_weight_matrix(const NetworkT<T>& net) {
    if (net.layers.empty() || net.layers.back().kind != LayerKind::linear)
        fail(ErrorKind::NoLinearHead, "final layer is not linear");
    return net.layers.back().weight;
}

template <typename T>
int argmax(const TensorT<T>& v) {
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

template <typename T>
int predict(const NetworkT<T>& net, const TensorT<T>& x) {
    return argmax(forward(net, x));
}

// Samples are independent; a batch is just the per-sample map.
template <typename T>
std::vector<TensorT<T>> forward_batch(const NetworkT<T>& net, const std::vector<TensorT<T>>& xs) {
    std::vector<TensorT<T>> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(forward(net, x));
    return out;
}

// Attack/analysis objectives. All three are maximized by the attacks module:
//   ce_toward(y):          J =  CE(f(x), y)        (untargeted ascent)
//   negative_ce_toward(y): J = -CE(f(x), y)        (targeted descent)
//   guided(y, d, beta):    J = -CE(f(x), y) + beta * <φ(x), d>
template <typename T>
struct ObjectiveSpecT {
    enum class Kind { ce_toward, negative_ce_toward, guided };
    Kind kind = Kind::ce_toward;
    int target = 0;
    T beta = T(0);
    TensorT<T> direction;  // guided only; length = feature dim

    static ObjectiveSpecT ce_toward(int y) { return {Kind::ce_toward, y, T(0), {}}; }
    static ObjectiveSpecT negative_ce_toward(int y) { return {Kind::negative_ce_toward, y, T(0), {}}; }
    static ObjectiveSpecT guided(int y, TensorT<T> d, T beta) {
        return {Kind::guided, y, beta, std::move(d)};
    }
};

template <typename T>
T objective_value(const NetworkT<T>& net, const TensorT<T>& x, const ObjectiveSpecT<T>& obj) {
    using Kind = typename ObjectiveSpecT<T>::Kind;
    if (obj.kind == Kind::ce_toward)
        return softmax_cross_entropy(forward(net, x), obj.target).first;
    const auto acts = forward_all(net, x);
    T value = -softmax_cross_entropy(acts.back(), obj.target).first;
    if (obj.kind == Kind::guided && obj.beta != T(0))
        value += obj.beta * dot(acts[net.feature_tap], obj.direction);
    return value;
}

template <typename T>
struct ParamGradsT {
    TensorT<T> weight;
    TensorT<T> bias;
};

template <typename T>
struct BackwardResultT {
    T loss = 0;
    TensorT<T> input_grad;
    std::vector<ParamGradsT<T>> param_grads;  // aligned with net.layers
};

// Reverse sweep shared by training, input gradients, and distillation.
// `dlogits` seeds the sweep; `injections` adds extra gradient contributions to
// named activations (feature-tap guidance, attention-map alignment) as the
// sweep passes them. Injection tensors must match the activation shapes.
template <typename T>
BackwardResultT<T> backward_network(const NetworkT<T>& net, const TensorT<T>& x,
                                    const std::vector<TensorT<T>>& acts, TensorT<T> dlogits,
                                    const std::vector<std::pair<int, const TensorT<T>*>>& injections,
                                    bool want_param_grads) {
    BackwardResultT<T> result;
    if (want_param_grads) result.param_grads.resize(net.layers.size());
    const int L = static_cast<int>(net.layers.size());
    TensorT<T> grad = std::move(dlogits);
    auto inject_into = [&](int act_index, TensorT<T>& g) {
        for (const auto& [idx, addend] : injections) {
            if (idx != act_index) continue;
            if (!addend->same_shape(g))
                fail(ErrorKind::ShapeMismatch, "gradient injection shape mismatch at layer " + std::to_string(idx));
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += (*addend)[i];
        }
    };
    inject_into(L - 1, grad);
    for (int i = L - 1; i >= 0; --i) {
        const TensorT<T>& input = (i == 0) ? x : acts[i - 1];
        auto back = backward_layer(net.layers[i], input, grad);
        if (want_param_grads && net.layers[i].has_params()) {
            result.param_grads[i].weight = std::move(back.weight_grad);
            result.param_grads[i].bias = std::move(back.bias_grad);
        }
        grad = std::move(back.input_grad);
        if (i > 0) inject_into(i - 1, grad);
    }
    result.input_grad = std::move(grad);
    return result;
}

// Gradient of the scalar objective with respect to the input. The guided
// objective adds beta*d at the feature tap during the sweep; with beta = 0 the
// code path is identical to negative_ce_toward, which keeps the two bitwise
// equal by construction.
template <typename T>
TensorT<T> input_gradient(const NetworkT<T>& net, const TensorT<T>& x, const ObjectiveSpecT<T>& obj) {
    using Kind = typename ObjectiveSpecT<T>::Kind;
    const auto acts = forward_all(net, x);
    auto [loss, dlogits] = softmax_cross_entropy(acts.back(), obj.target);
    (void)loss;
    if (obj.kind != Kind::ce_toward)
        for (std::size_t i = 0; i < dlogits.size(); ++i) dlogits[i] = -dlogits[i];
    std::vector<std::pair<int, const TensorT<T>*>> injections;
    TensorT<T> guidance;
    if (obj.kind == Kind::guided && obj.beta != T(0)) {
        if (obj.direction.size() != static_cast<std::size_t>(net.feature_dim()))
            fail(ErrorKind::ShapeMismatch, "guided objective: direction length != feature dim");
        guidance = TensorT<T>(obj.direction.shape());
        for (std::size_t i = 0; i < guidance.size(); ++i) guidance[i] = obj.beta * obj.direction[i];
        injections.emplace_back(net.feature_tap, &guidance);
    }
    auto result = backward_network(net, x, acts, std::move(dlogits), injections, false);
    result.input_grad.require_finite(ErrorKind::NonFiniteGradient, "input_gradient");
    return std::move(result.input_grad);
}

// ---- BDLM serialization ----------------------------------------------------
//
// Versioned little-endian binary, parameters stored as f32:
//   "BDLM" | u16 version=1 | u32 C,H,W | u16 num_classes | i16 feature_tap |
//   u32 layer_count | per layer: u8 kind | hyperparameters | parameter tensors
// conv2d hypers: u16 out_channels,kernel,stride,padding; linear: u16 out_dim.
// Tensor encoding: u8 ndim | u32 dims... | f32 data.

namespace detail {

template <typename T>
void write_param_tensor(ByteWriter& w, const TensorT<T>& t) {
    w.u8(static_cast<std::uint8_t>(t.shape().size()));
    for (int d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size(); ++i) w.f32(static_cast<float>(t[i]));
}

template <typename T>
void read_param_tensor(ByteReader& r, TensorT<T>& dst, const std::string& what) {
    const int ndim = r.u8();
    Shape shape(ndim);
    for (int i = 0; i < ndim; ++i) shape[i] = static_cast<int>(r.u32());
    if (shape != dst.shape())
        fail(ErrorKind::FormatError, "BDLM: " + what + " shape " + shape_to_string(shape) +
                                         " inconsistent with layer wiring " + shape_to_string(dst.shape()));
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(r.f32());
}

}  // namespace detail

template <typename T>
std::string serialize_network(const NetworkT<T>& net) {
    ByteWriter w;
    w.raw("BDLM", 4);
    w.u16(1);
    for (int d : net.input_shape) w.u32(static_cast<std::uint32_t>(d));
    w.u16(static_cast<std::uint16_t>(net.num_classes));
    w.i16(static_cast<std::int16_t>(net.feature_tap));
    w.u32(static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) {
        w.u8(static_cast<std::uint8_t>(layer.kind));
        switch (layer.kind) {
            case LayerKind::conv2d:
                w.u16(static_cast<std::uint16_t>(layer.out_channels));
                w.u16(static_cast<std::uint16_t>(layer.kernel));
                w.u16(static_cast<std::uint16_t>(layer.stride));
                w.u16(static_cast<std::uint16_t>(layer.padding));
                detail::write_param_tensor(w, layer.weight);
                detail::write_param_tensor(w, layer.bias);
                break;
            case LayerKind::linear:
                w.u16(static_cast<std::uint16_t>(layer.out_dim));
                detail::write_param_tensor(w, layer.weight);
                detail::write_param_tensor(w, layer.bias);
                break;
            default:
                break;
        }
    }
    return w.bytes();
}

template <typename T>
NetworkT<T> deserialize_network(const std::string& bytes, const std::string& context = "BDLM") {
    ByteReader r(bytes, context);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::string(magic, 4) != "BDLM") fail(ErrorKind::FormatError, context + ": bad magic");
    const int version = r.u16();
    if (version != 1) fail(ErrorKind::FormatError, context + ": unsupported version " + std::to_string(version));
    NetworkT<T> net;
    net.input_shape.resize(3);
    for (int& d : net.input_shape) d = static_cast<int>(r.u32());
    net.num_classes = r.u16();
    net.feature_tap = r.i16();
    const int layer_count = static_cast<int>(r.u32());
    Shape shape = net.input_shape;
    for (int i = 0; i < layer_count; ++i) {
        const auto kind = static_cast<LayerKind>(r.u8());
        LayerT<T> layer;
        switch (kind) {
            case LayerKind::conv2d: {
                const int oc = r.u16(), k = r.u16(), s = r.u16(), p = r.u16();
                layer = make_conv2d<T>(oc, k, s, p);
                break;
            }
            case LayerKind::linear:
                layer = make_linear<T>(r.u16());
                break;
            case LayerKind::relu:
                layer = make_relu<T>();
                break;
            case LayerKind::global_avg_pool:
                layer = make_global_avg_pool<T>();
                break;
            case LayerKind::flatten:
                layer = make_flatten<T>();
                break;
            default:
                fail(ErrorKind::FormatError, context + ": unknown layer kind tag");
        }
        wire_layer(layer, shape);
        shape = layer.out_shape;
        if (layer.has_params()) {
            detail::read_param_tensor(r, layer.weight, to_string(layer.kind) + std::string(" weight"));
            detail::read_param_tensor(r, layer.bias, to_string(layer.kind) + std::string(" bias"));
        }
        net.layers.push_back(std::move(layer));
    }
    if (!r.at_end()) fail(ErrorKind::FormatError, context + ": trailing bytes");
    validate_network(net);
    return net;
}

template <typename T>
void save_network(const NetworkT<T>& net, const std::string& path) {
    atomic_write_file(path, serialize_network(net));
}

template <typename T>
NetworkT<T> load_network(const std::string& path) {
    require_artifact(path);
    return deserialize_network<T>(read_file(path), path);
}

// Stable identity of architecture + parameters; used as the provenance hash
// that ties a BackdoorDirection to the exact network it was estimated on.
template <typename T>
std::string network_hash(const NetworkT<T>& net) {
    const std::uint64_t h = fnv1a64(serialize_network(net));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

template <typename T>
bool same_architecture(const NetworkT<T>& a, const NetworkT<T>& b) {
    if (a.input_shape != b.input_shape || a.num_classes != b.num_classes ||
        a.feature_tap != b.feature_tap || a.layers.size() != b.layers.size())
        return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const auto& la = a.layers[i];
        const auto& lb = b.layers[i];
        if (la.kind != lb.kind || la.out_channels != lb.out_channels || la.kernel != lb.kernel ||
            la.stride != lb.stride || la.padding != lb.padding || la.out_dim != lb.out_dim)
            return false;
    }
    return true;
}

using Network = NetworkT<real_t>;
using ObjectiveSpec = ObjectiveSpecT<real_t>;
using ParamGrads = ParamGradsT<real_t>;
using BackwardResult = BackwardResultT<real_t>;

}  // namespace bdlab
