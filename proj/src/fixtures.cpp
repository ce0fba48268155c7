#include "bdlab/fixtures.hpp"

#include "bdlab/io.hpp"

namespace bdlab {

namespace {

std::vector<ReferenceFixture> make_fixtures() {
    std::vector<ReferenceFixture> f;
    const auto add = [&](const char* group, const char* trigger, const char* metric,
                         double eps, double value) {
        f.push_back({group, trigger, metric, eps, value});
    };

    // Targeted PGD toward the backdoor label on backdoored models, by budget.
    add("tpgd_asr", "badnets", "tpgd_asr", 8, 98.18);
    add("tpgd_asr", "badnets", "tpgd_asr", 16, 99.73);
    add("tpgd_asr", "badnets", "tpgd_asr", 32, 99.89);
    add("tpgd_asr", "blend", "tpgd_asr", 8, 96.99);
    add("tpgd_asr", "blend", "tpgd_asr", 16, 99.09);
    add("tpgd_asr", "blend", "tpgd_asr", 32, 99.67);
    add("tpgd_asr", "wanet", "tpgd_asr", 8, 99.07);
    add("tpgd_asr", "wanet", "tpgd_asr", 16, 99.96);
    add("tpgd_asr", "wanet", "tpgd_asr", 32, 100.0);
    add("tpgd_asr", "input_aware", "tpgd_asr", 8, 22.34);
    add("tpgd_asr", "input_aware", "tpgd_asr", 16, 64.13);
    add("tpgd_asr", "input_aware", "tpgd_asr", 32, 93.63);

    // Attention distillation brings the original trigger near chance, yet the
    // guided re-attack keeps succeeding — the pattern the desk pipeline
    // reproduces qualitatively.
    add("nad", "badnets", "asr_after_nad", 0, 8.92);
    add("nad", "wanet", "asr_after_nad", 0, 10.37);
    add("nad", "blend", "asr_after_nad", 0, 7.86);
    add("nad", "input_aware", "asr_after_nad", 0, 10.43);
    add("nad", "badnets", "fga_after_nad", 0, 63.38);
    add("nad", "wanet", "fga_after_nad", 0, 68.06);
    add("nad", "blend", "fga_after_nad", 0, 79.11);
    add("nad", "input_aware", "fga_after_nad", 0, 85.02);

    // Unlearning the discovered alternative trigger: the unlearned trigger
    // itself (measured at 8/255) and fresh guided re-attacks by budget.
    add("unlearn_fga", "badnets", "asr_after_unlearning", 8, 97.70);
    add("unlearn_fga", "wanet", "asr_after_unlearning", 8, 99.28);
    add("unlearn_fga", "blend", "asr_after_unlearning", 8, 95.73);
    add("unlearn_fga", "input_aware", "asr_after_unlearning", 8, 17.76);
    add("unlearn_fga", "badnets", "fga_reattack", 8, 97.24);
    add("unlearn_fga", "badnets", "fga_reattack", 16, 99.46);
    add("unlearn_fga", "badnets", "fga_reattack", 32, 99.75);
    add("unlearn_fga", "wanet", "fga_reattack", 8, 99.04);
    add("unlearn_fga", "wanet", "fga_reattack", 16, 99.97);
    add("unlearn_fga", "wanet", "fga_reattack", 32, 100.0);
    add("unlearn_fga", "blend", "fga_reattack", 8, 95.13);
    add("unlearn_fga", "blend", "fga_reattack", 16, 98.47);
    add("unlearn_fga", "blend", "fga_reattack", 32, 99.49);
    add("unlearn_fga", "input_aware", "fga_reattack", 8, 10.39);
    add("unlearn_fga", "input_aware", "fga_reattack", 16, 23.53);
    add("unlearn_fga", "input_aware", "fga_reattack", 32, 73.75);

    // Perceptual scores of original vs. discovered triggers. LPIPS needs a
    // pretrained perceptual network, so the desk pipeline reports SSIM only;
    // the LPIPS columns stay here for completeness.
    add("perceptual", "badnets", "lpips_original", 0, 0.018);
    add("perceptual", "wanet", "lpips_original", 0, 0.007);
    add("perceptual", "blend", "lpips_original", 0, 0.019);
    add("perceptual", "input_aware", "lpips_original", 0, 0.236);
    add("perceptual", "badnets", "ssim_original", 0, 0.942);
    add("perceptual", "wanet", "ssim_original", 0, 0.943);
    add("perceptual", "blend", "ssim_original", 0, 0.495);
    add("perceptual", "input_aware", "ssim_original", 0, 0.014);
    add("perceptual", "badnets", "lpips_alternative", 8, 0.127);
    add("perceptual", "badnets", "lpips_alternative", 16, 0.127);
    add("perceptual", "badnets", "lpips_alternative", 32, 0.127);
    add("perceptual", "wanet", "lpips_alternative", 8, 0.127);
    add("perceptual", "wanet", "lpips_alternative", 16, 0.127);
    add("perceptual", "wanet", "lpips_alternative", 32, 0.126);
    add("perceptual", "blend", "lpips_alternative", 8, 0.127);
    add("perceptual", "blend", "lpips_alternative", 16, 0.127);
    add("perceptual", "blend", "lpips_alternative", 32, 0.128);
    add("perceptual", "input_aware", "lpips_alternative", 8, 0.128);
    add("perceptual", "input_aware", "lpips_alternative", 16, 0.131);
    add("perceptual", "input_aware", "lpips_alternative", 32, 0.137);
    add("perceptual", "badnets", "ssim_alternative", 8, 0.252);
    add("perceptual", "badnets", "ssim_alternative", 16, 0.236);
    add("perceptual", "badnets", "ssim_alternative", 32, 0.219);
    add("perceptual", "wanet", "ssim_alternative", 8, 0.252);
    add("perceptual", "wanet", "ssim_alternative", 16, 0.234);
    add("perceptual", "wanet", "ssim_alternative", 32, 0.216);
    add("perceptual", "blend", "ssim_alternative", 8, 0.252);
    add("perceptual", "blend", "ssim_alternative", 16, 0.233);
    add("perceptual", "blend", "ssim_alternative", 32, 0.213);
    add("perceptual", "input_aware", "ssim_alternative", 8, 0.249);
    add("perceptual", "input_aware", "ssim_alternative", 16, 0.227);
    add("perceptual", "input_aware", "ssim_alternative", 32, 0.194);

    return f;
}

}  // namespace

const std::vector<ReferenceFixture>& reference_fixtures() {
    static const std::vector<ReferenceFixture> table = make_fixtures();
    return table;
}

void save_fixtures_csv(const std::string& path) {
    std::string out = csv_row({"group", "trigger", "metric", "epsilon_255", "value"});
    for (const ReferenceFixture& f : reference_fixtures())
        out += csv_row({f.group, f.trigger, f.metric, fmt_real(f.epsilon_255), fmt_real(f.value)});
    atomic_write_file(path, out);
}

}  // namespace bdlab
