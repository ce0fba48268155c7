#include "bdlab/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "bdlab/io.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

void validate_dataset(const Dataset& ds) {
    if (ds.samples.empty()) fail(ErrorKind::InvalidConfig, "dataset is empty");
    if (ds.num_classes < 2) fail(ErrorKind::InvalidConfig, "dataset needs at least 2 classes");
    const Shape& shape = ds.image_shape();
    for (const auto& s : ds.samples) {
        s.pixels.require_shape(shape, "validate_dataset");
        if (s.label < 0 || s.label >= ds.num_classes)
            fail(ErrorKind::LabelOutOfRange,
                 "sample " + std::to_string(s.id) + " has label " + std::to_string(s.label) +
                     " outside [0," + std::to_string(ds.num_classes) + ")");
        for (std::size_t i = 0; i < s.pixels.size(); ++i)
            if (s.pixels[i] < real_t(0) || s.pixels[i] > real_t(1))
                fail(ErrorKind::InvalidConfig,
                     "sample " + std::to_string(s.id) + " has pixels outside [0,1]");
    }
}

namespace {

// Channel weights of a class prototype: class 0 lights all channels equally
// (white); class c >= 1 favors channel (c-1) mod C with a small leak into the
// rest so single-channel images still carry some signal.
real_t channel_weight(int cls, int channel, int channels, real_t off_channel) {
    if (cls == 0) return real_t(1);
    const int hot = (cls - 1) % channels;
    return channel == hot ? real_t(1) : off_channel;
}

void add_blob(Tensor& pixels, int cls, real_t cy, real_t cx, real_t weight,
              const SynthTuning& tune) {
    const int c = pixels.shape()[0], h = pixels.shape()[1], w = pixels.shape()[2];
    const bool annulus = cls == 0 && tune.ring0_radius > real_t(0);
    const real_t inv = annulus
                           ? real_t(1) / (2 * tune.ring0_sigma * tune.ring0_sigma)
                           : real_t(1) / (2 * tune.blob_sigma * tune.blob_sigma);
    for (int ch = 0; ch < c; ++ch) {
        const real_t amp =
            weight * tune.blob_amp * channel_weight(cls, ch, c, tune.off_channel);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const real_t dy = static_cast<real_t>(y) - cy;
                const real_t dx = static_cast<real_t>(x) - cx;
                real_t dist2 = dy * dy + dx * dx;
                if (annulus) {
                    const real_t r = std::sqrt(dist2) - tune.ring0_radius;
                    dist2 = r * r;
                }
                pixels.at(ch, y, x) += amp * std::exp(-dist2 * inv);
            }
    }
}

}  // namespace

Dataset synth_dataset(int m, int per_class, const Shape& shape, std::uint64_t seed,
                      Split split, const SynthTuning& tune) {
    if (m < 2) fail(ErrorKind::InvalidConfig, "synth_dataset: need at least 2 classes");
    if (per_class < 10) fail(ErrorKind::InvalidConfig, "synth_dataset: need at least 10 samples per class");
    if (shape.size() != 3) fail(ErrorKind::InvalidConfig, "synth_dataset: shape must be C,H,W");

    const int h = shape[1], w = shape[2];
    const real_t mid_y = static_cast<real_t>(h - 1) / 2;
    const real_t mid_x = static_cast<real_t>(w - 1) / 2;

    Dataset ds;
    ds.num_classes = m;
    ds.split = split;
    Rng rng(seed);
    const double tau = 6.28318530717958648;
    for (int cls = 0; cls < m; ++cls) {
        for (int i = 0; i < per_class; ++i) {
            LabeledImage sample;
            sample.label = cls;
            sample.id = cls * per_class + i;
            sample.pixels = Tensor::full(shape, tune.background);

            // Primary blob on the class ring position, jittered per sample.
            const double theta = tau * cls / m - tau / 4;
            const real_t cy = mid_y + tune.ring_radius * static_cast<real_t>(std::sin(theta)) +
                              tune.center_jitter * static_cast<real_t>(rng.normal());
            const real_t cx = mid_x + tune.ring_radius * static_cast<real_t>(std::cos(theta)) +
                              tune.center_jitter * static_cast<real_t>(rng.normal());

            // A faint second prototype keeps confidence moderate.
            int other = static_cast<int>(rng.uniform_index(m - 1));
            if (other >= cls) ++other;
            const real_t t = static_cast<real_t>(rng.uniform(0.0, tune.mix_max));
            const double theta2 = tau * other / m - tau / 4;
            const real_t cy2 = mid_y + tune.ring_radius * static_cast<real_t>(std::sin(theta2)) +
                               tune.center_jitter * static_cast<real_t>(rng.normal());
            const real_t cx2 = mid_x + tune.ring_radius * static_cast<real_t>(std::cos(theta2)) +
                               tune.center_jitter * static_cast<real_t>(rng.normal());

            add_blob(sample.pixels, cls, cy, cx, real_t(1) - t, tune);
            add_blob(sample.pixels, other, cy2, cx2, t, tune);

            // Class-independent checkerboard carrier. Zero-mean, so it leaves
            // channel averages (the color signal) alone, but it gives every
            // image high-frequency structure whose local phase geometric
            // transformations disturb in a way pooled conv features can see.
            if (tune.texture_amp > real_t(0)) {
                for (int ch = 0; ch < shape[0]; ++ch)
                    for (int y = 0; y < h; ++y)
                        for (int x = 0; x < w; ++x)
                            sample.pixels.at(ch, y, x) +=
                                ((y + x) % 2 == 0 ? tune.texture_amp : -tune.texture_amp);
            }

            for (std::size_t p = 0; p < sample.pixels.size(); ++p) {
                const real_t v =
                    sample.pixels[p] + tune.pixel_noise * static_cast<real_t>(rng.normal());
                sample.pixels[p] = std::clamp(v, real_t(0), real_t(1));
            }

            if (tune.label_noise > real_t(0) &&
                rng.uniform(0.0, 1.0) < static_cast<double>(tune.label_noise)) {
                int noisy = static_cast<int>(rng.uniform_index(m - 1));
                if (noisy >= cls) ++noisy;
                sample.label = noisy;
            }
            ds.samples.push_back(std::move(sample));
        }
    }
    validate_dataset(ds);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    validate_dataset(ds);
    const Shape& shape = ds.image_shape();
    ByteWriter wout;
    wout.raw("BDLD", 4);
    wout.u16(1);
    wout.u32(static_cast<std::uint32_t>(ds.samples.size()));
    for (int d : shape) wout.u32(static_cast<std::uint32_t>(d));
    wout.u8(static_cast<std::uint8_t>(ds.num_classes));
    for (const auto& s : ds.samples) {
        wout.u16(static_cast<std::uint16_t>(s.label));
        for (std::size_t i = 0; i < s.pixels.size(); ++i) wout.f32(static_cast<float>(s.pixels[i]));
    }
    atomic_write_file(path, wout.bytes());
}

Dataset load_dataset(const std::string& path, Split split) {
    require_artifact(path);
    const std::string bytes = read_file(path);
    ByteReader r(bytes, path);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::string(magic, 4) != "BDLD") fail(ErrorKind::FormatError, path + ": bad magic");
    const int version = r.u16();
    if (version != 1)
        fail(ErrorKind::FormatError, path + ": unsupported version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    Shape shape(3);
    for (int& d : shape) d = static_cast<int>(r.u32());
    Dataset ds;
    ds.num_classes = r.u8();
    ds.split = split;
    ds.samples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        LabeledImage s;
        s.id = static_cast<int>(i);
        s.label = r.u16();
        if (s.label >= ds.num_classes)
            fail(ErrorKind::FormatError, path + ": sample " + std::to_string(i) + " has label " +
                                             std::to_string(s.label) + " >= num_classes");
        s.pixels = Tensor(shape);
        for (std::size_t p = 0; p < s.pixels.size(); ++p) s.pixels[p] = static_cast<real_t>(r.f32());
        ds.samples.push_back(std::move(s));
    }
    if (!r.at_end()) fail(ErrorKind::FormatError, path + ": trailing bytes");
    validate_dataset(ds);
    return ds;
}

namespace {

// IDX is big-endian; our ByteReader is little-endian, so compose by byte.
std::uint32_t u32be(ByteReader& r) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | r.u8();
    return v;
}

}  // namespace

Dataset import_idx(const std::string& images_path, const std::string& labels_path, Split split) {
    require_artifact(images_path);
    require_artifact(labels_path);

    const std::string ibytes = read_file(images_path);
    ByteReader ir(ibytes, images_path);
    if (u32be(ir) != 0x00000803)
        fail(ErrorKind::FormatError, images_path + ": not an IDX ubyte image file");
    const std::uint32_t count = u32be(ir);
    const int h = static_cast<int>(u32be(ir));
    const int w = static_cast<int>(u32be(ir));

    const std::string lbytes = read_file(labels_path);
    ByteReader lr(lbytes, labels_path);
    if (u32be(lr) != 0x00000801)
        fail(ErrorKind::FormatError, labels_path + ": not an IDX ubyte label file");
    if (u32be(lr) != count)
        fail(ErrorKind::FormatError, labels_path + ": label count differs from image count");

    Dataset ds;
    ds.split = split;
    ds.samples.reserve(count);
    int max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        LabeledImage s;
        s.id = static_cast<int>(i);
        s.label = lr.u8();
        max_label = std::max(max_label, s.label);
        s.pixels = Tensor({1, h, w});
        for (std::size_t p = 0; p < s.pixels.size(); ++p)
            s.pixels[p] = static_cast<real_t>(ir.u8()) / real_t(255);
        ds.samples.push_back(std::move(s));
    }
    ds.num_classes = max_label + 1;
    if (!ir.at_end()) fail(ErrorKind::FormatError, images_path + ": trailing bytes");
    if (!lr.at_end()) fail(ErrorKind::FormatError, labels_path + ": trailing bytes");
    validate_dataset(ds);
    return ds;
}

}  // namespace bdlab
