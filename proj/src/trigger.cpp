#include "bdlab/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bdlab/rng.hpp"

namespace bdlab {

TriggerSpec badnets_trigger(int target_label, int patch_size, Corner corner, real_t value) {
    TriggerSpec spec;
    spec.kind = TriggerKind::badnets;
    spec.target_label = target_label;
    spec.patch_size = patch_size;
    spec.corner = corner;
    spec.patch_value = value;
    return spec;
}

TriggerSpec blend_trigger(int target_label, Tensor pattern, real_t alpha) {
    TriggerSpec spec;
    spec.kind = TriggerKind::blend;
    spec.target_label = target_label;
    spec.pattern = std::move(pattern);
    spec.alpha = alpha;
    return spec;
}

TriggerSpec blend_trigger(int target_label, const Shape& image_shape, std::uint64_t pattern_seed,
                          real_t alpha) {
    Tensor pattern(image_shape);
    Rng rng(pattern_seed);
    for (std::size_t i = 0; i < pattern.size(); ++i)
        pattern[i] = static_cast<real_t>(rng.uniform());
    return blend_trigger(target_label, std::move(pattern), alpha);
}

TriggerSpec wanet_trigger(int target_label, std::uint64_t warp_seed, int grid_k, real_t strength_s) {
    TriggerSpec spec;
    spec.kind = TriggerKind::wanet;
    spec.target_label = target_label;
    spec.warp_seed = warp_seed;
    spec.grid_k = grid_k;
    spec.strength_s = strength_s;
    return spec;
}

void validate_trigger(const TriggerSpec& spec, const Shape& image_shape) {
    if (image_shape.size() != 3)
        fail(ErrorKind::ShapeMismatch, "trigger expects C,H,W images, got " + shape_to_string(image_shape));
    const int h = image_shape[1], w = image_shape[2];
    switch (spec.kind) {
        case TriggerKind::badnets:
            if (spec.patch_size < 1 || spec.patch_size > h || spec.patch_size > w)
                fail(ErrorKind::InvalidConfig, "badnets: patch does not fit inside the image");
            if (spec.patch_value < real_t(0) || spec.patch_value > real_t(1))
                fail(ErrorKind::InvalidConfig, "badnets: patch value must lie in [0,1]");
            break;
        case TriggerKind::blend:
            if (!(spec.alpha > real_t(0)) || !(spec.alpha < real_t(1)))
                fail(ErrorKind::InvalidConfig, "blend: alpha must lie in (0,1)");
            if (spec.pattern.shape() != image_shape)
                fail(ErrorKind::ShapeMismatch, "blend: pattern shape " + shape_to_string(spec.pattern.shape()) +
                                                   " does not match image shape " + shape_to_string(image_shape));
            break;
        case TriggerKind::wanet:
            if (spec.grid_k < 2) fail(ErrorKind::InvalidConfig, "wanet: grid_k must be >= 2");
            // s = 0 is the identity warp; useful as a reference point, so
            // only negative strengths are rejected.
            if (spec.strength_s < real_t(0)) fail(ErrorKind::InvalidConfig, "wanet: strength must be >= 0");
            if (h < 2 || w < 2) fail(ErrorKind::InvalidConfig, "wanet: image must be at least 2x2");
            break;
    }
}

WarpField make_warp_field(const TriggerSpec& spec, int h, int w) {
    const int k = spec.grid_k;
    // Control offsets in [-1,1], drawn (dy,dx) per control point row-major.
    std::vector<real_t> cy(static_cast<std::size_t>(k) * k), cx(cy.size());
    Rng rng(spec.warp_seed);
    for (std::size_t i = 0; i < cy.size(); ++i) {
        cy[i] = static_cast<real_t>(rng.uniform(-1.0, 1.0));
        cx[i] = static_cast<real_t>(rng.uniform(-1.0, 1.0));
    }

    WarpField field;
    field.h = h;
    field.w = w;
    field.dy.resize(static_cast<std::size_t>(h) * w);
    field.dx.resize(field.dy.size());
    // Bilinear upsample: control point (i,j) sits at pixel
    // (i*(h-1)/(k-1), j*(w-1)/(k-1)); the field is the interpolated offset
    // scaled by strength_s, in pixel units.
    for (int y = 0; y < h; ++y) {
        const real_t gy = static_cast<real_t>(y) * (k - 1) / static_cast<real_t>(h - 1);
        const int y0 = std::min(static_cast<int>(gy), k - 2);
        const real_t fy = gy - static_cast<real_t>(y0);
        for (int x = 0; x < w; ++x) {
            const real_t gx = static_cast<real_t>(x) * (k - 1) / static_cast<real_t>(w - 1);
            const int x0 = std::min(static_cast<int>(gx), k - 2);
            const real_t fx = gx - static_cast<real_t>(x0);
            const auto at = [&](const std::vector<real_t>& g, int i, int j) {
                return g[static_cast<std::size_t>(i) * k + j];
            };
            const auto lerp2 = [&](const std::vector<real_t>& g) {
                return (real_t(1) - fy) * ((real_t(1) - fx) * at(g, y0, x0) + fx * at(g, y0, x0 + 1)) +
                       fy * ((real_t(1) - fx) * at(g, y0 + 1, x0) + fx * at(g, y0 + 1, x0 + 1));
            };
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            field.dy[p] = spec.strength_s * lerp2(cy);
            field.dx[p] = spec.strength_s * lerp2(cx);
        }
    }
    return field;
}

namespace {

Tensor apply_badnets(const Tensor& pixels, const TriggerSpec& spec) {
    Tensor out = pixels;
    const int c = pixels.shape()[0], h = pixels.shape()[1], w = pixels.shape()[2];
    const int p = spec.patch_size;
    const int y0 = (spec.corner == Corner::bottom_right || spec.corner == Corner::bottom_left) ? h - p : 0;
    const int x0 = (spec.corner == Corner::bottom_right || spec.corner == Corner::top_right) ? w - p : 0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = y0; y < y0 + p; ++y)
            for (int x = x0; x < x0 + p; ++x) out.at(ch, y, x) = spec.patch_value;
    return out;
}

Tensor apply_blend(const Tensor& pixels, const TriggerSpec& spec) {
    Tensor out(pixels.shape());
    const real_t a = spec.alpha;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const real_t x = pixels[i];
        real_t o = std::clamp(x + a * (spec.pattern[i] - x), real_t(0), real_t(1));
        // The addition can overshoot the alpha-ball by an ulp; pull back so
        // d_inf(out, x) <= alpha holds exactly in the working precision.
        while (o - x > a) o = std::nextafter(o, x);
        while (x - o > a) o = std::nextafter(o, x);
        out[i] = o;
    }
    return out;
}

Tensor apply_wanet(const Tensor& pixels, const TriggerSpec& spec) {
    const int c = pixels.shape()[0], h = pixels.shape()[1], w = pixels.shape()[2];
    const WarpField field = make_warp_field(spec, h, w);
    Tensor out(pixels.shape());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            // Backward warp with border clamp: sample the source at (y,x)+offset.
            const real_t sy = std::clamp(static_cast<real_t>(y) + field.dy[p], real_t(0),
                                         static_cast<real_t>(h - 1));
            const real_t sx = std::clamp(static_cast<real_t>(x) + field.dx[p], real_t(0),
                                         static_cast<real_t>(w - 1));
            const int iy0 = std::min(static_cast<int>(sy), h - 2 >= 0 ? h - 2 : 0);
            const int ix0 = std::min(static_cast<int>(sx), w - 2 >= 0 ? w - 2 : 0);
            const real_t fy = sy - static_cast<real_t>(iy0);
            const real_t fx = sx - static_cast<real_t>(ix0);
            for (int ch = 0; ch < c; ++ch) {
                const real_t v =
                    (real_t(1) - fy) * ((real_t(1) - fx) * pixels.at(ch, iy0, ix0) +
                                        fx * pixels.at(ch, iy0, ix0 + 1)) +
                    fy * ((real_t(1) - fx) * pixels.at(ch, iy0 + 1, ix0) +
                          fx * pixels.at(ch, iy0 + 1, ix0 + 1));
                out.at(ch, y, x) = std::clamp(v, real_t(0), real_t(1));
            }
        }
    }
    return out;
}

}  // namespace

Tensor apply_trigger(const Tensor& pixels, const TriggerSpec& spec) {
    validate_trigger(spec, pixels.shape());
    switch (spec.kind) {
        case TriggerKind::badnets: return apply_badnets(pixels, spec);
        case TriggerKind::blend: return apply_blend(pixels, spec);
        case TriggerKind::wanet: return apply_wanet(pixels, spec);
    }
    fail(ErrorKind::InvalidConfig, "unknown trigger kind");
}

std::pair<Dataset, PoisonPlan> poison_dataset(const Dataset& train, const TriggerSpec& spec,
                                              double rate, std::uint64_t seed) {
    validate_dataset(train);
    validate_trigger(spec, train.image_shape());
    if (!(rate > 0.0) || !(rate < 1.0))
        fail(ErrorKind::InvalidConfig, "poison rate must lie in (0,1)");
    if (spec.target_label < 0 || spec.target_label >= train.num_classes)
        fail(ErrorKind::LabelOutOfRange, "poison target label outside [0,m)");

    const std::size_t n = train.samples.size();
    const std::size_t n_poison =
        static_cast<std::size_t>(std::lround(rate * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::size_t> chosen(order.begin(), order.begin() + n_poison);
    std::sort(chosen.begin(), chosen.end());

    Dataset poisoned = train;
    PoisonPlan plan;
    plan.rate = rate;
    plan.target_label = spec.target_label;
    plan.seed = seed;
    plan.poisoned_ids.reserve(n_poison);
    for (std::size_t idx : chosen) {
        LabeledImage& s = poisoned.samples[idx];
        s.pixels = apply_trigger(s.pixels, spec);
        s.label = spec.target_label;
        plan.poisoned_ids.push_back(s.id);
    }
    return {std::move(poisoned), std::move(plan)};
}

}  // namespace bdlab
