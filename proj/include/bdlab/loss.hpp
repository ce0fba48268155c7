#pragma once

#include <cmath>
#include <utility>

#include "bdlab/tensor.hpp"

namespace bdlab {

// Numerically stabilized softmax (max-subtraction).
template <typename T>
TensorT<T> softmax(const TensorT<T>& logits) {
    if (logits.shape().size() != 1) fail(ErrorKind::ShapeMismatch, "softmax expects a vector");
    TensorT<T> p(logits.shape());
    T mx = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    T sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i) p[i] /= sum;
    return p;
}

// loss = -log softmax(logits)[label]; grad = softmax(logits) - one_hot(label).
// Computed from shifted logits so uniform logits give exactly ln(m).
template <typename T>
std::pair<T, TensorT<T>> softmax_cross_entropy(const TensorT<T>& logits, int label) {
    if (logits.shape().size() != 1) fail(ErrorKind::ShapeMismatch, "softmax_cross_entropy expects a logit vector");
    const int m = static_cast<int>(logits.size());
    if (label < 0 || label >= m)
        fail(ErrorKind::LabelOutOfRange, "label " + std::to_string(label) + " for " + std::to_string(m) + " classes");
    T mx = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    T sum = 0;
    TensorT<T> grad(logits.shape());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        grad[i] = std::exp(logits[i] - mx);
        sum += grad[i];
    }
    const T loss = std::log(sum) - (logits[label] - mx);
    for (std::size_t i = 0; i < logits.size(); ++i) grad[i] /= sum;
    grad[label] -= T(1);
    if (!std::isfinite(static_cast<double>(loss)))
        fail(ErrorKind::NonFiniteValue, "softmax_cross_entropy: non-finite loss");
    return {loss, std::move(grad)};
}

}  // namespace bdlab
