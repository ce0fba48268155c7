#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "bdlab/tensor.hpp"

namespace bdlab {

enum class LayerKind : std::uint8_t {
    conv2d = 0,
    relu = 1,
    linear = 2,
    global_avg_pool = 3,
    flatten = 4,
};

inline const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::linear: return "linear";
        case LayerKind::global_avg_pool: return "global_avg_pool";
        case LayerKind::flatten: return "flatten";
    }
    return "unknown";
}

// One layer with its hyperparameters, parameters, and wired input/output
// shapes. Shapes are fixed when the layer is wired into a network; every
// forward/backward call checks them.
template <typename T>
struct LayerT {
    LayerKind kind = LayerKind::relu;

    // conv2d hyperparameters
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;

    // linear hyperparameter
    int out_dim = 0;

    TensorT<T> weight;  // conv2d: [O,C,K,K]; linear: [out,in]
    TensorT<T> bias;    // conv2d: [O]; linear: [out]

    Shape in_shape;
    Shape out_shape;

    bool has_params() const { return kind == LayerKind::conv2d || kind == LayerKind::linear; }
};

template <typename T>
LayerT<T> make_conv2d(int out_channels, int kernel, int stride = 1, int padding = 0) {
    if (out_channels < 1 || kernel < 1 || stride < 1 || padding < 0)
        fail(ErrorKind::InvalidConfig, "conv2d: out_channels/kernel/stride must be >= 1, padding >= 0");
    LayerT<T> layer;
    layer.kind = LayerKind::conv2d;
    layer.out_channels = out_channels;
    layer.kernel = kernel;
    layer.stride = stride;
    layer.padding = padding;
    return layer;
}

template <typename T>
LayerT<T> make_relu() {
    LayerT<T> layer;
    layer.kind = LayerKind::relu;
    return layer;
}

template <typename T>
LayerT<T> make_linear(int out_dim) {
    if (out_dim < 1) fail(ErrorKind::InvalidConfig, "linear: out_dim must be >= 1");
    LayerT<T> layer;
    layer.kind = LayerKind::linear;
    layer.out_dim = out_dim;
    return layer;
}

template <typename T>
LayerT<T> make_global_avg_pool() {
    LayerT<T> layer;
    layer.kind = LayerKind::global_avg_pool;
    return layer;
}

template <typename T>
LayerT<T> make_flatten() {
    LayerT<T> layer;
    layer.kind = LayerKind::flatten;
    return layer;
}

// Computes the output shape and allocates zero parameters for the given input
// shape. Called once when a network is assembled.
template <typename T>
void wire_layer(LayerT<T>& layer, const Shape& in_shape) {
    layer.in_shape = in_shape;
    switch (layer.kind) {
        case LayerKind::conv2d: {
            if (in_shape.size() != 3)
                fail(ErrorKind::ShapeMismatch, "conv2d expects C,H,W input, got " + shape_to_string(in_shape));
            const int c = in_shape[0], h = in_shape[1], w = in_shape[2];
            const int oh = (h + 2 * layer.padding - layer.kernel) / layer.stride + 1;
            const int ow = (w + 2 * layer.padding - layer.kernel) / layer.stride + 1;
            if (oh < 1 || ow < 1)
                fail(ErrorKind::ShapeMismatch, "conv2d kernel larger than padded input");
            layer.out_shape = {layer.out_channels, oh, ow};
            layer.weight = TensorT<T>({layer.out_channels, c, layer.kernel, layer.kernel});
            layer.bias = TensorT<T>({layer.out_channels});
            break;
        }
        case LayerKind::relu:
            layer.out_shape = in_shape;
            break;
        case LayerKind::linear: {
            if (in_shape.size() != 1)
                fail(ErrorKind::ShapeMismatch, "linear expects a flat input, got " + shape_to_string(in_shape));
            layer.out_shape = {layer.out_dim};
            layer.weight = TensorT<T>({layer.out_dim, in_shape[0]});
            layer.bias = TensorT<T>({layer.out_dim});
            break;
        }
        case LayerKind::global_avg_pool:
            if (in_shape.size() != 3)
                fail(ErrorKind::ShapeMismatch, "global_avg_pool expects C,H,W input");
            layer.out_shape = {in_shape[0]};
            break;
        case LayerKind::flatten:
            layer.out_shape = {static_cast<int>(shape_product(in_shape))};
            break;
    }
}

template <typename T>
TensorT<T> forward_layer(const LayerT<T>& layer, const TensorT<T>& input) {
    input.require_shape(layer.in_shape, std::string("forward ") + to_string(layer.kind));
    TensorT<T> out(layer.out_shape);
    switch (layer.kind) {
        case LayerKind::conv2d: {
            const int c_in = layer.in_shape[0], h = layer.in_shape[1], w = layer.in_shape[2];
            const int oh = layer.out_shape[1], ow = layer.out_shape[2];
            const int k = layer.kernel, s = layer.stride, p = layer.padding;
            for (int oc = 0; oc < layer.out_channels; ++oc) {
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        T acc = layer.bias[oc];
                        for (int ic = 0; ic < c_in; ++ic) {
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = oy * s + ky - p;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = ox * s + kx - p;
                                    if (ix < 0 || ix >= w) continue;
                                    acc += layer.weight[((static_cast<std::size_t>(oc) * c_in + ic) * k + ky) * k + kx] *
                                           input.at(ic, iy, ix);
                                }
                            }
                        }
                        out.at(oc, oy, ox) = acc;
                    }
                }
            }
            break;
        }
        case LayerKind::relu:
            for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
            break;
        case LayerKind::linear: {
            const int n_in = layer.in_shape[0];
            for (int o = 0; o < layer.out_dim; ++o) {
                T acc = layer.bias[o];
                const T* row = layer.weight.data() + static_cast<std::size_t>(o) * n_in;
                for (int i = 0; i < n_in; ++i) acc += row[i] * input[i];
                out[o] = acc;
            }
            break;
        }
        case LayerKind::global_avg_pool: {
            const int c = layer.in_shape[0];
            const std::size_t hw = static_cast<std::size_t>(layer.in_shape[1]) * layer.in_shape[2];
            for (int ic = 0; ic < c; ++ic) {
                T acc = 0;
                const T* base = input.data() + ic * hw;
                for (std::size_t i = 0; i < hw; ++i) acc += base[i];
                out[ic] = acc / static_cast<T>(hw);
            }
            break;
        }
        case LayerKind::flatten:
            for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i];
            break;
    }
    out.require_finite(ErrorKind::NonFiniteValue, std::string("forward ") + to_string(layer.kind));
    return out;
}

template <typename T>
struct LayerBackwardT {
    TensorT<T> input_grad;
    TensorT<T> weight_grad;  // empty for parameter-free layers
    TensorT<T> bias_grad;
};

template <typename T>
LayerBackwardT<T> backward_layer(const LayerT<T>& layer, const TensorT<T>& input,
                                 const TensorT<T>& upstream_grad) {
    input.require_shape(layer.in_shape, std::string("backward ") + to_string(layer.kind));
    upstream_grad.require_shape(layer.out_shape, std::string("backward ") + to_string(layer.kind) + " upstream");
    LayerBackwardT<T> back;
    back.input_grad = TensorT<T>(layer.in_shape);
    if (layer.has_params()) {
        back.weight_grad = TensorT<T>(layer.weight.shape());
        back.bias_grad = TensorT<T>(layer.bias.shape());
    }
    switch (layer.kind) {
        case LayerKind::conv2d: {
            const int c_in = layer.in_shape[0], h = layer.in_shape[1], w = layer.in_shape[2];
            const int oh = layer.out_shape[1], ow = layer.out_shape[2];
            const int k = layer.kernel, s = layer.stride, p = layer.padding;
            for (int oc = 0; oc < layer.out_channels; ++oc) {
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        const T g = upstream_grad.at(oc, oy, ox);
                        back.bias_grad[oc] += g;
                        for (int ic = 0; ic < c_in; ++ic) {
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = oy * s + ky - p;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = ox * s + kx - p;
                                    if (ix < 0 || ix >= w) continue;
                                    const std::size_t wi =
                                        ((static_cast<std::size_t>(oc) * c_in + ic) * k + ky) * k + kx;
                                    back.weight_grad[wi] += g * input.at(ic, iy, ix);
                                    back.input_grad.at(ic, iy, ix) += g * layer.weight[wi];
                                }
                            }
                        }
                    }
                }
            }
            break;
        }
        case LayerKind::relu:
            for (std::size_t i = 0; i < input.size(); ++i)
                back.input_grad[i] = input[i] > T(0) ? upstream_grad[i] : T(0);
            break;
        case LayerKind::linear: {
            const int n_in = layer.in_shape[0];
            for (int o = 0; o < layer.out_dim; ++o) {
                const T g = upstream_grad[o];
                back.bias_grad[o] = g;
                const T* row = layer.weight.data() + static_cast<std::size_t>(o) * n_in;
                T* wrow = back.weight_grad.data() + static_cast<std::size_t>(o) * n_in;
                for (int i = 0; i < n_in; ++i) {
                    wrow[i] = g * input[i];
                    back.input_grad[i] += row[i] * g;
                }
            }
            break;
        }
        case LayerKind::global_avg_pool: {
            const int c = layer.in_shape[0];
            const std::size_t hw = static_cast<std::size_t>(layer.in_shape[1]) * layer.in_shape[2];
            for (int ic = 0; ic < c; ++ic) {
                const T g = upstream_grad[ic] / static_cast<T>(hw);
                T* base = back.input_grad.data() + ic * hw;
                for (std::size_t i = 0; i < hw; ++i) base[i] = g;
            }
            break;
        }
        case LayerKind::flatten:
            for (std::size_t i = 0; i < input.size(); ++i) back.input_grad[i] = upstream_grad[i];
            break;
    }
    back.input_grad.require_finite(ErrorKind::NonFiniteGradient, std::string("backward ") + to_string(layer.kind));
    return back;
}

using Layer = LayerT<real_t>;
using LayerBackward = LayerBackwardT<real_t>;

}  // namespace bdlab
