#pragma once

#include <cmath>
#include <functional>

#include "bdlab/tensor.hpp"

namespace bdlab {

// Central-difference gradient estimate, component by component. This is the
// oracle the analytic gradients are tested against; keep it dumb on purpose.
template <typename T>
TensorT<T> finite_difference_grad(const std::function<T(const TensorT<T>&)>& f,
                                  const TensorT<T>& point, T step) {
    if (!(step > T(0))) fail(ErrorKind::InvalidConfig, "finite_difference_grad: step must be > 0");
    TensorT<T> grad(point.shape());
    TensorT<T> probe = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const T saved = probe[i];
        probe[i] = saved + step;
        const T up = f(probe);
        probe[i] = saved - step;
        const T down = f(probe);
        probe[i] = saved;
        if (!std::isfinite(static_cast<double>(up)) || !std::isfinite(static_cast<double>(down)))
            fail(ErrorKind::NonFiniteFunctionValue, "finite_difference_grad: function value not finite");
        grad[i] = (up - down) / (T(2) * step);
    }
    return grad;
}

// Max relative error between an analytic gradient and its finite-difference
// estimate; the denominator is floored so near-zero entries compare absolutely.
template <typename T>
T max_relative_error(const TensorT<T>& analytic, const TensorT<T>& numeric, T floor = T(1e-4)) {
    if (!analytic.same_shape(numeric)) fail(ErrorKind::ShapeMismatch, "max_relative_error: shape mismatch");
    T worst = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const T denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

}  // namespace bdlab
