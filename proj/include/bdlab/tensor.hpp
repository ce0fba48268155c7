#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>
#include <string>
#include <vector>

#include "bdlab/error.hpp"
#include "bdlab/scalar.hpp"

namespace bdlab {

using Shape = std::vector<int>;

inline std::size_t shape_product(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) fail(ErrorKind::ShapeMismatch, "non-positive dimension in shape");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

inline std::string shape_to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Dense row-major tensor. Values are immutable by convention once an operation
// has produced them; ops hand back fresh tensors instead of mutating inputs.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(Shape shape)
        : shape_(std::move(shape)), data_(shape_product(shape_), T(0)) {}

    TensorT(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_product(shape_) != data_.size())
            fail(ErrorKind::ShapeMismatch, "data length does not match shape " + shape_to_string(shape_));
    }

    static TensorT full(Shape shape, T value) {
        TensorT t(std::move(shape));
        for (T& v : t.data_) v = value;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // 3-D accessors for C,H,W image tensors.
    T& at(int c, int h, int w) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    const T& at(int c, int h, int w) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    void require_shape(const Shape& expected, const std::string& where) const {
        if (shape_ != expected)
            fail(ErrorKind::ShapeMismatch,
                 where + ": expected " + shape_to_string(expected) + ", got " + shape_to_string(shape_));
    }

    void require_finite(ErrorKind kind, const std::string& where) const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v)))
                fail(kind, where + ": non-finite value");
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<real_t>;

template <typename T>
T dot(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.size() != b.size()) fail(ErrorKind::ShapeMismatch, "dot: length mismatch");
    T s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
T l2_norm(const TensorT<T>& a) {
    T s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return std::sqrt(s);
}

template <typename T>
T linf_diff(const TensorT<T>& a, const TensorT<T>& b) {
    if (!a.same_shape(b)) fail(ErrorKind::ShapeMismatch, "linf_diff: shape mismatch");
    T m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

template <typename T>
bool bitwise_equal(const TensorT<T>& a, const TensorT<T>& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

}  // namespace bdlab
