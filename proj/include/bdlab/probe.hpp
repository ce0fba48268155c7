#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bdlab/dataset.hpp"
#include "bdlab/network.hpp"
#include "bdlab/trigger.hpp"

namespace bdlab {

// The estimated backdoor direction at the feature tap: the unit vector from
// the mean clean feature to the mean triggered feature, with per-sample
// displacement magnitudes kept around for the interpolation probe. The
// provenance hash ties the estimate to the exact network it came from, so a
// direction can never silently be reused on a repaired model.
struct BackdoorDirection {
    Tensor d;  // unit vector, feature_dim entries
    int layer_tag = -1;
    int target_label = 0;
    int n_samples = 0;
    double mean_displacement = 0;  // mean of per-sample s
    std::vector<std::pair<int, double>> per_sample_s;    // (sample id, ||phi(pi(x)) - phi(x)||)
    std::vector<std::pair<int, double>> per_sample_cos;  // (sample id, <shift, d>/||shift||), diagnostic
    std::string model_hash;  // network_hash of the estimating network
};

// Core arithmetic, exposed for direct testing: paired clean/triggered feature
// vectors in, normalized mean-shift direction out.
BackdoorDirection direction_from_features(const std::vector<Tensor>& clean_feats,
                                          const std::vector<Tensor>& trig_feats,
                                          const std::vector<int>& sample_ids, int layer_tag,
                                          int target_label);

// Estimates the direction from the validation samples the network classifies
// correctly. Needs at least 2 such samples and a non-degenerate mean shift.
BackdoorDirection estimate_direction(const Network& net, const Dataset& ds,
                                     const TriggerSpec& spec, int threads = 1);

struct InterpolationCurve {
    std::vector<double> alphas;
    std::vector<double> mean_prob;
    std::vector<double> std_prob;  // population standard deviation
    int n = 0;
    std::vector<std::vector<double>> per_sample;  // [alpha index][sample index]
};

// 0, 0.05, ..., 1.5 — the grid the curve figures use.
std::vector<double> default_alpha_grid();

// Walks phi_alpha = phi(x) + alpha * s * d through the head, where s is the
// sample's own displacement magnitude (mean displacement for samples the
// estimate never saw), and records the softmax probability of the target.
// alpha = 0 bypasses the addition entirely, so it reproduces the clean logits
// bitwise.
InterpolationCurve interpolation_probe(const Network& net, const std::vector<LabeledImage>& samples,
                                       const BackdoorDirection& dir,
                                       const std::vector<double>& alphas, int threads = 1);

// Cosine between the adversarial feature shift and the direction; 0 when the
// shift is numerically zero.
double alignment(const Network& net, const Tensor& x_clean, const Tensor& x_adv,
                 const BackdoorDirection& dir);

// v = W d for the final linear layer's weight matrix, plus argmax(v). On a
// backdoored model the dominant class is the implant target; on anything else
// this is a diagnostic with no guarantee.
std::pair<Tensor, int> head_projection(const Network& net, const BackdoorDirection& dir);

// BDIR container (little-endian): "BDIR" | u16 version=1 | u32 dim |
// f32 d[dim] | i16 layer_tag | u16 target_label | u32 n_samples |
// f64 mean_displacement | hash (u8 len + bytes) |
// u32 count | per entry: u32 id + f64 s + f64 cos.
void save_direction(const BackdoorDirection& dir, const std::string& path);
BackdoorDirection load_direction(const std::string& path);

// CSV: alpha, mean_prob, std_prob, n.
void save_curve_csv(const InterpolationCurve& curve, const std::string& path);

}  // namespace bdlab
