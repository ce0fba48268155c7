#include "bdlab/ssim.hpp"

#include <array>
#include <cmath>

namespace bdlab {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow * kWindow> gaussian_window() {
    std::array<double, kWindow * kWindow> w{};
    const int mid = kWindow / 2;
    double total = 0;
    for (int i = 0; i < kWindow; ++i)
        for (int j = 0; j < kWindow; ++j) {
            const double d2 = (i - mid) * (i - mid) + (j - mid) * (j - mid);
            w[static_cast<std::size_t>(i) * kWindow + j] = std::exp(-d2 / (2 * kSigma * kSigma));
            total += w[static_cast<std::size_t>(i) * kWindow + j];
        }
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

double ssim(const Tensor& x, const Tensor& y) {
    if (x.shape().size() != 3)
        fail(ErrorKind::ShapeMismatch, "ssim expects C,H,W images, got " + shape_to_string(x.shape()));
    y.require_shape(x.shape(), "ssim");
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    if (h < kWindow || w < kWindow)
        fail(ErrorKind::ImageTooSmall, "ssim needs images of at least " + std::to_string(kWindow) +
                                           "x" + std::to_string(kWindow) + ", got " +
                                           std::to_string(h) + "x" + std::to_string(w));

    static const std::array<double, kWindow * kWindow> win = gaussian_window();

    double total = 0;
    std::size_t windows = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy + kWindow <= h; ++oy) {
            for (int ox = 0; ox + kWindow <= w; ++ox) {
                double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
                for (int i = 0; i < kWindow; ++i) {
                    for (int j = 0; j < kWindow; ++j) {
                        const double g = win[static_cast<std::size_t>(i) * kWindow + j];
                        const double xv = x.at(ch, oy + i, ox + j);
                        const double yv = y.at(ch, oy + i, ox + j);
                        mx += g * xv;
                        my += g * yv;
                        xx += g * xv * xv;
                        yy += g * yv * yv;
                        xy += g * xv * yv;
                    }
                }
                const double vx = xx - mx * mx;
                const double vy = yy - my * my;
                const double cov = xy - mx * my;
                total += ((2 * mx * my + kC1) * (2 * cov + kC2)) /
                         ((mx * mx + my * my + kC1) * (vx + vy + kC2));
                ++windows;
            }
        }
    }
    return total / static_cast<double>(windows);
}

}  // namespace bdlab
