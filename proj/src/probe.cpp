#include "bdlab/probe.hpp"

#include <algorithm>
#include <cmath>

#include "bdlab/io.hpp"
#include "bdlab/loss.hpp"
#include "bdlab/parallel.hpp"

namespace bdlab {

BackdoorDirection direction_from_features(const std::vector<Tensor>& clean_feats,
                                          const std::vector<Tensor>& trig_feats,
                                          const std::vector<int>& sample_ids, int layer_tag,
                                          int target_label) {
    if (clean_feats.size() != trig_feats.size() || clean_feats.size() != sample_ids.size())
        fail(ErrorKind::ShapeMismatch, "direction_from_features: paired lists differ in length");
    if (clean_feats.size() < 2)
        fail(ErrorKind::TooFewCleanSamples,
             "direction estimation needs at least 2 correctly classified samples, got " +
                 std::to_string(clean_feats.size()));

    const Shape& fshape = clean_feats.front().shape();
    const std::size_t dim = clean_feats.front().size();
    const std::size_t n = clean_feats.size();

    // Means accumulate in double regardless of the working precision; the
    // tiny extra cost buys a stable direction estimate.
    std::vector<double> mean_shift(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        clean_feats[i].require_shape(fshape, "direction_from_features(clean)");
        trig_feats[i].require_shape(fshape, "direction_from_features(triggered)");
        for (std::size_t j = 0; j < dim; ++j)
            mean_shift[j] += (static_cast<double>(trig_feats[i][j]) -
                              static_cast<double>(clean_feats[i][j])) /
                             static_cast<double>(n);
    }
    double norm2 = 0;
    for (double v : mean_shift) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    if (norm < 1e-9)
        fail(ErrorKind::DegenerateDirection,
             "mean triggered and clean features coincide (shift norm " + std::to_string(norm) + ")");

    BackdoorDirection dir;
    dir.d = Tensor(fshape);
    for (std::size_t j = 0; j < dim; ++j)
        dir.d[j] = static_cast<real_t>(mean_shift[j] / norm);
    dir.layer_tag = layer_tag;
    dir.target_label = target_label;
    dir.n_samples = static_cast<int>(n);

    double s_total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double shift2 = 0, dot_d = 0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double delta =
                static_cast<double>(trig_feats[i][j]) - static_cast<double>(clean_feats[i][j]);
            shift2 += delta * delta;
            dot_d += delta * static_cast<double>(dir.d[j]);
        }
        const double s = std::sqrt(shift2);
        dir.per_sample_s.emplace_back(sample_ids[i], s);
        dir.per_sample_cos.emplace_back(sample_ids[i], s < 1e-9 ? 0.0 : dot_d / s);
        s_total += s;
    }
    dir.mean_displacement = s_total / static_cast<double>(n);
    return dir;
}

BackdoorDirection estimate_direction(const Network& net, const Dataset& ds,
                                     const TriggerSpec& spec, int threads) {
    validate_dataset(ds);
    validate_trigger(spec, ds.image_shape());
    if (ds.image_shape() != net.input_shape)
        fail(ErrorKind::ShapeMismatch, "estimate_direction: dataset does not match network input");

    // Correctly classified samples form the clean set; their triggered
    // counterparts are computed with the same fixed trigger.
    std::vector<char> correct(ds.samples.size());
    parallel_for(ds.samples.size(), threads, [&](std::size_t i) {
        correct[i] = predict(net, ds.samples[i].pixels) == ds.samples[i].label;
    });
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        if (correct[i]) keep.push_back(i);
    if (keep.size() < 2)
        fail(ErrorKind::TooFewCleanSamples,
             "direction estimation needs at least 2 correctly classified samples, got " +
                 std::to_string(keep.size()));

    std::vector<Tensor> clean_feats(keep.size()), trig_feats(keep.size());
    std::vector<int> ids(keep.size());
    parallel_for(keep.size(), threads, [&](std::size_t k) {
        const LabeledImage& s = ds.samples[keep[k]];
        clean_feats[k] = features_at(net, s.pixels);
        trig_feats[k] = features_at(net, apply_trigger(s.pixels, spec));
        ids[k] = s.id;
    });

    BackdoorDirection dir = direction_from_features(clean_feats, trig_feats, ids,
                                                    net.feature_tap, spec.target_label);
    dir.model_hash = network_hash(net);
    return dir;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> alphas;
    for (int i = 0; i <= 30; ++i) alphas.push_back(i * 0.05);
    return alphas;
}

namespace {

void check_direction(const Network& net, const BackdoorDirection& dir, const char* where) {
    if (dir.layer_tag != net.feature_tap)
        fail(ErrorKind::ShapeMismatch, std::string(where) + ": direction layer tag " +
                                           std::to_string(dir.layer_tag) +
                                           " does not match network feature tap " +
                                           std::to_string(net.feature_tap));
    if (dir.d.size() != static_cast<std::size_t>(net.feature_dim()))
        fail(ErrorKind::ShapeMismatch, std::string(where) + ": direction length " +
                                           std::to_string(dir.d.size()) +
                                           " does not match feature dim " +
                                           std::to_string(net.feature_dim()));
    double norm2 = 0;
    for (std::size_t j = 0; j < dir.d.size(); ++j)
        norm2 += static_cast<double>(dir.d[j]) * static_cast<double>(dir.d[j]);
    if (std::sqrt(norm2) < 1e-9)
        fail(ErrorKind::DegenerateDirection, std::string(where) + ": direction has zero norm");
}

}  // namespace

InterpolationCurve interpolation_probe(const Network& net, const std::vector<LabeledImage>& samples,
                                       const BackdoorDirection& dir,
                                       const std::vector<double>& alphas, int threads) {
    check_direction(net, dir, "interpolation_probe");
    if (samples.empty()) fail(ErrorKind::EmptyEvaluationSet, "interpolation_probe: no samples");
    if (alphas.empty()) fail(ErrorKind::InvalidConfig, "interpolation_probe: empty alpha grid");
    for (std::size_t i = 1; i < alphas.size(); ++i)
        if (!(alphas[i] > alphas[i - 1]))
            fail(ErrorKind::InvalidConfig, "interpolation_probe: alphas must be strictly increasing");

    InterpolationCurve curve;
    curve.alphas = alphas;
    curve.n = static_cast<int>(samples.size());
    curve.per_sample.assign(alphas.size(), std::vector<double>(samples.size(), 0.0));

    parallel_for(samples.size(), threads, [&](std::size_t i) {
        const LabeledImage& s = samples[i];
        const Tensor phi = features_at(net, s.pixels);

        // The sample's own displacement magnitude where known.
        double scale = dir.mean_displacement;
        for (const auto& [id, sv] : dir.per_sample_s)
            if (id == s.id) {
                scale = sv;
                break;
            }

        for (std::size_t a = 0; a < alphas.size(); ++a) {
            Tensor logits;
            if (alphas[a] == 0.0) {
                logits = head_forward(net, phi);  // bitwise the clean head pass
            } else {
                Tensor shifted = phi;
                const real_t step = static_cast<real_t>(alphas[a] * scale);
                for (std::size_t j = 0; j < shifted.size(); ++j) shifted[j] += step * dir.d[j];
                logits = head_forward(net, shifted);
            }
            curve.per_sample[a][i] = softmax(logits)[dir.target_label];
        }
    });

    for (std::size_t a = 0; a < alphas.size(); ++a) {
        double sum = 0;
        for (double p : curve.per_sample[a]) sum += p;
        const double mean = sum / static_cast<double>(samples.size());
        double var = 0;
        for (double p : curve.per_sample[a]) var += (p - mean) * (p - mean);
        curve.mean_prob.push_back(mean);
        curve.std_prob.push_back(std::sqrt(var / static_cast<double>(samples.size())));
    }
    return curve;
}

double alignment(const Network& net, const Tensor& x_clean, const Tensor& x_adv,
                 const BackdoorDirection& dir) {
    check_direction(net, dir, "alignment");
    const Tensor phi_clean = features_at(net, x_clean);
    const Tensor phi_adv = features_at(net, x_adv);
    double shift2 = 0, d2 = 0, dot_d = 0;
    for (std::size_t j = 0; j < phi_clean.size(); ++j) {
        const double delta = static_cast<double>(phi_adv[j]) - static_cast<double>(phi_clean[j]);
        const double dv = dir.d[j];
        shift2 += delta * delta;
        d2 += dv * dv;
        dot_d += delta * dv;
    }
    const double shift_norm = std::sqrt(shift2);
    if (shift_norm < 1e-9) return 0.0;
    return dot_d / (shift_norm * std::sqrt(d2));
}

std::pair<Tensor, int> head_projection(const Network& net, const BackdoorDirection& dir) {
    const Tensor w = head_weight_matrix(net);
    const int m = w.shape()[0];
    const int dim = w.shape()[1];
    if (dir.d.size() != static_cast<std::size_t>(dim))
        fail(ErrorKind::ShapeMismatch, "head_projection: direction length " +
                                           std::to_string(dir.d.size()) +
                                           " does not match head width " + std::to_string(dim));
    Tensor v({m});
    for (int o = 0; o < m; ++o) {
        real_t acc = 0;
        for (int j = 0; j < dim; ++j) acc += w[static_cast<std::size_t>(o) * dim + j] * dir.d[j];
        v[o] = acc;
    }
    const int dominant = argmax(v);
    return {std::move(v), dominant};
}

void save_direction(const BackdoorDirection& dir, const std::string& path) {
    ByteWriter w;
    w.raw("BDIR", 4);
    w.u16(1);
    w.u32(static_cast<std::uint32_t>(dir.d.size()));
    for (std::size_t j = 0; j < dir.d.size(); ++j) w.f32(static_cast<float>(dir.d[j]));
    w.i16(static_cast<std::int16_t>(dir.layer_tag));
    w.u16(static_cast<std::uint16_t>(dir.target_label));
    w.u32(static_cast<std::uint32_t>(dir.n_samples));
    w.f64(dir.mean_displacement);
    w.u8(static_cast<std::uint8_t>(dir.model_hash.size()));
    w.raw(dir.model_hash.data(), dir.model_hash.size());
    w.u32(static_cast<std::uint32_t>(dir.per_sample_s.size()));
    for (std::size_t i = 0; i < dir.per_sample_s.size(); ++i) {
        w.u32(static_cast<std::uint32_t>(dir.per_sample_s[i].first));
        w.f64(dir.per_sample_s[i].second);
        w.f64(dir.per_sample_cos[i].second);
    }
    atomic_write_file(path, w.bytes());
}

BackdoorDirection load_direction(const std::string& path) {
    require_artifact(path);
    const std::string bytes = read_file(path);
    ByteReader r(bytes, path);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::string(magic, 4) != "BDIR") fail(ErrorKind::FormatError, path + ": bad magic");
    const int version = r.u16();
    if (version != 1)
        fail(ErrorKind::FormatError, path + ": unsupported version " + std::to_string(version));
    BackdoorDirection dir;
    const std::uint32_t dim = r.u32();
    dir.d = Tensor({static_cast<int>(dim)});
    for (std::uint32_t j = 0; j < dim; ++j) dir.d[j] = static_cast<real_t>(r.f32());
    dir.layer_tag = r.i16();
    dir.target_label = r.u16();
    dir.n_samples = static_cast<int>(r.u32());
    dir.mean_displacement = r.f64();
    const int hash_len = r.u8();
    for (int i = 0; i < hash_len; ++i) dir.model_hash.push_back(static_cast<char>(r.u8()));
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const int id = static_cast<int>(r.u32());
        const double s = r.f64();
        const double cos = r.f64();
        dir.per_sample_s.emplace_back(id, s);
        dir.per_sample_cos.emplace_back(id, cos);
    }
    if (!r.at_end()) fail(ErrorKind::FormatError, path + ": trailing bytes");
    return dir;
}

void save_curve_csv(const InterpolationCurve& curve, const std::string& path) {
    std::string out = csv_row({"alpha", "mean_prob", "std_prob", "n"});
    for (std::size_t a = 0; a < curve.alphas.size(); ++a)
        out += csv_row({fmt_real(curve.alphas[a]), fmt_real(curve.mean_prob[a]),
                        fmt_real(curve.std_prob[a]), std::to_string(curve.n)});
    atomic_write_file(path, out);
}

}  // namespace bdlab
