#pragma once

#include "bdlab/tensor.hpp"

namespace bdlab {

// Mean local structural similarity over all fully-interior 11x11 windows,
// Gaussian-weighted (sigma 1.5), constants C1=(0.01)^2 and C2=(0.03)^2 for a
// unit dynamic range, averaged across channels. Accumulation runs in double.
// Identical inputs score exactly 1.0 and the metric is exactly symmetric,
// because both sides go through the same arithmetic.
double ssim(const Tensor& x, const Tensor& y);

}  // namespace bdlab
