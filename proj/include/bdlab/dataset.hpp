#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdlab/tensor.hpp"

namespace bdlab {

enum class Split { train, val, test };

inline const char* to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "unknown";
}

struct LabeledImage {
    Tensor pixels;  // C,H,W in [0,1]
    int label = 0;
    int id = 0;  // stable within its dataset
};

struct Dataset {
    std::vector<LabeledImage> samples;
    int num_classes = 0;
    Split split = Split::train;

    std::size_t size() const { return samples.size(); }
    const Shape& image_shape() const { return samples.front().pixels.shape(); }
};

// Enforces the dataset invariants: non-empty, uniform image shape, pixels in
// [0,1], every label < num_classes.
void validate_dataset(const Dataset& ds);

// Knobs of the synthetic generator. Classes are Gaussian color blobs sitting
// on a ring: class 0 is white (lights every channel, like the patch triggers
// do), higher classes each favor one channel. Prototype mixing and pixel noise
// keep the classifier honest — learnable, but never trivially confident.
// Defaults are tuned for 3x8x8 images with 4 classes.
struct SynthTuning {
    real_t background = 0.10f;     // base intensity everywhere
    real_t blob_amp = 0.85f;       // peak blob intensity above background
    real_t blob_sigma = 1.3f;      // Gaussian radius in pixels
    real_t ring_radius = 2.2f;     // class-center distance from image center
    real_t center_jitter = 0.5f;   // per-sample center displacement (std dev)
    real_t pixel_noise = 0.10f;    // additive Gaussian noise (std dev)
    real_t mix_max = 0.30f;        // max blend-in weight of a second class
    real_t off_channel = 0.15f;    // color leak into non-dominant channels
    real_t texture_amp = 0.0f;     // checkerboard carrier amplitude (zero-mean)
    // When > 0, class 0 renders as a white annulus of this radius instead of a
    // filled blob. Channel means barely change, so color alone still separates
    // class 0 from the single-channel classes, but the shape cue lets a conv
    // model tell "white ring" apart from any solid bright square.
    real_t ring0_radius = 0.0f;
    real_t ring0_sigma = 0.7f;     // radial thickness of the class-0 annulus
    // Fraction of samples whose label is resampled uniformly from the other
    // classes. Pixels always render the true class, so argmax ranking stays
    // intact while the Bayes-optimal confidence drops to 1 - label_noise.
    // Meant for training splits; evaluation splits should keep it at 0.
    real_t label_noise = 0.0f;
};

// Balanced synthetic dataset: per_class samples for each of m classes, pixels
// clipped to [0,1], fully determined by the seed.
Dataset synth_dataset(int m, int per_class, const Shape& shape, std::uint64_t seed,
                      Split split = Split::train, const SynthTuning& tune = {});

// BDLD container (little-endian): "BDLD" | u16 version=1 | u32 count |
// u32 C,H,W | u8 num_classes | per sample: u16 label + f32 pixels.
// Sample ids are positional and therefore not stored.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path, Split split = Split::train);

// IDX ingestion (big-endian dims, unsigned-byte payload) for small grayscale
// datasets; pixels are scaled to [0,1]. Exposed behind the import-idx
// subcommand — the standard pipeline runs on synth_dataset alone.
Dataset import_idx(const std::string& images_path, const std::string& labels_path,
                   Split split = Split::train);

}  // namespace bdlab
