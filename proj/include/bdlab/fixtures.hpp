#pragma once

#include <string>
#include <vector>

namespace bdlab {

// Published full-scale results (CIFAR-10, ResNet-18) that this lab mirrors
// qualitatively at desk scale. They ship as read-only documentation: nothing
// in the tests or the harness ever asserts a desk-scale number against them,
// because a 4-class 8x8 synthetic set cannot reproduce full-scale numbers.
// ASR values are percentages; SSIM/LPIPS are raw scores.
struct ReferenceFixture {
    std::string group;    // tpgd_asr | nad | unlearn_fga | perceptual
    std::string trigger;  // badnets | blend | wanet | input_aware
    std::string metric;
    double epsilon_255 = 0;  // attack budget in 1/255 units; 0 = not applicable
    double value = 0;
};

const std::vector<ReferenceFixture>& reference_fixtures();

// CSV: group, trigger, metric, epsilon_255, value.
void save_fixtures_csv(const std::string& path);

}  // namespace bdlab
