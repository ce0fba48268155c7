#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdlab/dataset.hpp"
#include "bdlab/tensor.hpp"

namespace bdlab {

enum class TriggerKind { badnets, blend, wanet };

inline const char* to_string(TriggerKind kind) {
    switch (kind) {
        case TriggerKind::badnets: return "badnets";
        case TriggerKind::blend: return "blend";
        case TriggerKind::wanet: return "wanet";
    }
    return "unknown";
}

enum class Corner { bottom_right, bottom_left, top_right, top_left };

// One trigger transformation π plus its target label. The three kinds share
// the struct; only the fields of the active kind are meaningful.
struct TriggerSpec {
    TriggerKind kind = TriggerKind::badnets;
    int target_label = 0;

    // badnets: solid square patch in a corner
    int patch_size = 3;
    Corner corner = Corner::bottom_right;
    real_t patch_value = real_t(1);

    // blend: out = (1-alpha) x + alpha pattern
    Tensor pattern;
    real_t alpha = real_t(0.2);

    // wanet: fixed sub-pixel warp field from a control grid
    int grid_k = 4;
    real_t strength_s = real_t(0.5);
    std::uint64_t warp_seed = 0;
};

TriggerSpec badnets_trigger(int target_label, int patch_size = 3,
                            Corner corner = Corner::bottom_right, real_t value = real_t(1));
TriggerSpec blend_trigger(int target_label, Tensor pattern, real_t alpha = real_t(0.2));
// Blend with a deterministic pseudo-random pattern in place of a fixed asset.
TriggerSpec blend_trigger(int target_label, const Shape& image_shape, std::uint64_t pattern_seed,
                          real_t alpha = real_t(0.2));
TriggerSpec wanet_trigger(int target_label, std::uint64_t warp_seed, int grid_k = 4,
                          real_t strength_s = real_t(0.5));

// Checks the spec against an image shape: patch fits, alpha in (0,1), pattern
// shape matches, grid_k >= 2, strength_s >= 0.
void validate_trigger(const TriggerSpec& spec, const Shape& image_shape);

// The warp field used by wanet triggers: per-pixel (dy,dx) offsets in pixel
// units, bilinearly upsampled from grid_k x grid_k control offsets drawn
// uniformly from [-1,1] and scaled by strength_s. Depends only on the spec,
// never on the sample.
struct WarpField {
    int h = 0, w = 0;
    std::vector<real_t> dy;  // h*w, row-major
    std::vector<real_t> dx;
};

WarpField make_warp_field(const TriggerSpec& spec, int h, int w);

// π(x). Pure: the input is never modified, the output always lies in [0,1],
// and for badnets every pixel outside the patch is carried over bitwise.
Tensor apply_trigger(const Tensor& pixels, const TriggerSpec& spec);

struct PoisonPlan {
    double rate = 0;
    int target_label = 0;
    std::uint64_t seed = 0;
    std::vector<int> poisoned_ids;  // ascending
};

// Dirty-label poisoning: round(rate * n) samples drawn uniformly without
// replacement get the trigger AND the target label; everyone else is carried
// over bitwise.
std::pair<Dataset, PoisonPlan> poison_dataset(const Dataset& train, const TriggerSpec& spec,
                                              double rate, std::uint64_t seed);

}  // namespace bdlab
