#include <doctest.h>

#include "bdlab/grad_check.hpp"
#include "bdlab/network.hpp"
#include "bdlab/rng.hpp"

using namespace bdlab;

namespace {

TensorT<double> random_image(const Shape& shape, Rng& rng, double lo = 0.1, double hi = 0.9) {
    TensorT<double> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// The finite-difference oracle is only valid when no ReLU input sits within
// the probe step of its kink; resample until the margin holds.
TensorT<double> kink_safe_image(const NetworkT<double>& net, Rng& rng, double margin = 1e-4) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        auto x = random_image(net.input_shape, rng);
        const auto acts = forward_all(net, x);
        double closest = 1e30;
        for (std::size_t i = 1; i < net.layers.size(); ++i) {
            if (net.layers[i].kind != LayerKind::relu) continue;
            for (std::size_t j = 0; j < acts[i - 1].size(); ++j)
                closest = std::min(closest, std::abs(acts[i - 1][j]));
        }
        if (closest > margin) return x;
    }
    FAIL("could not find a kink-safe probe input");
    return TensorT<double>(net.input_shape);
}

TensorT<double> random_unit(int dim, Rng& rng) {
    TensorT<double> d({dim});
    for (int i = 0; i < dim; ++i) d[i] = rng.normal();
    const double n = l2_norm(d);
    for (int i = 0; i < dim; ++i) d[i] /= n;
    return d;
}

}  // namespace

TEST_CASE("micronet preset wires the documented shapes") {
    auto net = make_micronet<double>({3, 8, 8}, 4);
    CHECK(net.layers.size() == 7);
    CHECK(net.feature_dim() == 16);
    const Shape conv1_out{8, 8, 8}, conv2_out{16, 4, 4}, tap_out{16}, head_w{4, 16};
    CHECK(net.layers[0].out_shape == conv1_out);
    CHECK(net.layers[2].out_shape == conv2_out);
    CHECK(net.layers[5].out_shape == tap_out);
    CHECK(head_weight_matrix(net).shape() == head_w);
    const Shape tall{1, 12, 9}, tiny{3, 4, 4}, ok{3, 8, 8};
    CHECK_NOTHROW(make_micronet<double>(tall, 2));
    CHECK_THROWS_AS(make_micronet<double>(tiny, 4), Error);
    CHECK_THROWS_AS(make_micronet<double>(ok, 1), Error);
}

TEST_CASE("zero-initialized network emits equal logits") {
    auto net = make_micronet<double>({3, 8, 8}, 4);
    Rng rng(1);
    auto logits = forward(net, random_image(net.input_shape, rng));
    for (int i = 1; i < 4; ++i) CHECK(logits[i] == logits[0]);
}

TEST_CASE("zero input through a zero-bias network gives zero features") {
    auto net = make_micronet<double>({3, 8, 8}, 4);
    init_params(net, 7);  // He weights, zero biases
    auto z = features_at(net, TensorT<double>({3, 8, 8}));
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);
}

TEST_CASE("batched forward equals per-sample forward") {
    auto net = make_micronet<double>({3, 8, 8}, 4);
    init_params(net, 21);
    Rng rng(2);
    std::vector<TensorT<double>> xs;
    for (int i = 0; i < 5; ++i) xs.push_back(random_image(net.input_shape, rng));
    auto batch = forward_batch(net, xs);
    for (int i = 0; i < 5; ++i) CHECK(bitwise_equal(batch[i], forward(net, xs[i])));
}

TEST_CASE("forward decomposes bitwise through the feature tap") {
    auto net = make_micronet<double>({3, 8, 8}, 4);
    init_params(net, 3);
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        auto x = random_image(net.input_shape, rng);
        CHECK(bitwise_equal(forward(net, x), head_forward(net, features_at(net, x))));
    }
}

TEST_CASE("identity-weight head maps basis features to their class") {
    // flatten -> linear(4) head over a 4-pixel input; W set to identity.
    std::vector<LayerT<double>> layers;
    layers.push_back(make_flatten<double>());
    layers.push_back(make_linear<double>(4));
    auto net = assemble_network<double>({1, 2, 2}, 4, 0, std::move(layers));
    for (int i = 0; i < 4; ++i) net.layers[1].weight[i * 4 + i] = 1.0;
    for (int t = 0; t < 4; ++t) {
        TensorT<double> z({4});
        z[t] = 1.0;
        CHECK(argmax(head_forward(net, z)) == t);
    }
}

TEST_CASE("head_weight_matrix demands a linear final layer") {
    std::vector<LayerT<double>> layers;
    layers.push_back(make_flatten<double>());
    layers.push_back(make_linear<double>(4));
    auto net = assemble_network<double>({1, 2, 2}, 4, 0, std::move(layers));
    net.layers.push_back(make_relu<double>());
    wire_layer(net.layers.back(), Shape{4});
    try {
        head_weight_matrix(net);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoLinearHead);
    }
}

TEST_CASE("guided objective with beta=0 reproduces the targeted gradient bitwise") {
    auto net = make_micronet<double>({3, 8, 8}, 4);
    init_params(net, 12);
    Rng rng(13);
    auto x = random_image(net.input_shape, rng);
    auto d = random_unit(net.feature_dim(), rng);
    auto g_plain = input_gradient(net, x, ObjectiveSpecT<double>::negative_ce_toward(2));
    auto g_guided = input_gradient(net, x, ObjectiveSpecT<double>::guided(2, d, 0.0));
    CHECK(bitwise_equal(g_plain, g_guided));
}

TEST_CASE("input gradients match finite differences for all objective kinds") {
    Rng rng(31);
    auto net = make_micronet<double>({2, 8, 8}, 3, MicroNetConfig{4, 8, 3});
    init_params(net, 77);
    for (int probe = 0; probe < 5; ++probe) {
        auto x = kink_safe_image(net, rng);
        const int y = static_cast<int>(rng.uniform_index(3));
        auto d = random_unit(net.feature_dim(), rng);
        const double beta = rng.uniform(0.2, 3.0);

        std::vector<ObjectiveSpecT<double>> objectives = {
            ObjectiveSpecT<double>::ce_toward(y),
            ObjectiveSpecT<double>::negative_ce_toward(y),
            ObjectiveSpecT<double>::guided(y, d, beta),
        };
        for (const auto& obj : objectives) {
            auto analytic = input_gradient(net, x, obj);
            auto fd = finite_difference_grad<double>(
                [&](const TensorT<double>& p) { return objective_value(net, p, obj); }, x, 1e-5);
            CHECK(max_relative_error(analytic, fd) <= 1e-4);
        }
    }
}

TEST_CASE("feature-guidance term through a linear feature map is exactly W^T d") {
    // flatten -> linear(3) (= φ) -> linear(2) zero head. With a zero head the
    // CE part contributes exactly zero at the tap, isolating the beta term.
    std::vector<LayerT<double>> layers;
    layers.push_back(make_flatten<double>());
    layers.push_back(make_linear<double>(3));
    layers.push_back(make_linear<double>(2));
    auto net = assemble_network<double>({1, 2, 2}, 2, 1, std::move(layers));
    Rng rng(8);
    for (std::size_t i = 0; i < net.layers[1].weight.size(); ++i)
        net.layers[1].weight[i] = rng.uniform(-1, 1);
    TensorT<double> d({3}, {0.5, -1.25, 2.0});
    auto x = random_image(net.input_shape, rng);
    auto grad = input_gradient(net, x, ObjectiveSpecT<double>::guided(0, d, 1.0));
    // Expected: (W^T d) with the same accumulation order as the backward pass,
    // shaped like the input because the flatten backward restores C,H,W.
    TensorT<double> expected({1, 2, 2});
    for (int o = 0; o < 3; ++o)
        for (int i = 0; i < 4; ++i) expected[i] += net.layers[1].weight[o * 4 + i] * d[o];
    CHECK(bitwise_equal(grad, expected));
}

TEST_CASE("BDLM round-trip preserves forward outputs") {
    auto net = make_micronet<real_t>({3, 8, 8}, 4);
    init_params(net, 55);
    const std::string bytes = serialize_network(net);
    auto loaded = deserialize_network<real_t>(bytes);
    Rng rng(56);
    for (int i = 0; i < 10; ++i) {
        Tensor x(net.input_shape);
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = static_cast<real_t>(rng.uniform());
        CHECK(bitwise_equal(forward(net, x), forward(loaded, x)));
    }
    CHECK(network_hash(net) == network_hash(loaded));
}

TEST_CASE("BDLM rejects corruption") {
    auto net = make_micronet<real_t>({3, 8, 8}, 2);
    init_params(net, 1);
    std::string bytes = serialize_network(net);

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    try {
        deserialize_network<real_t>(bad_magic);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::FormatError);
    }

    std::string truncated = bytes.substr(0, bytes.size() / 2);
    try {
        deserialize_network<real_t>(truncated);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::FormatError);
    }

    std::string trailing = bytes + "zz";
    CHECK_THROWS_AS(deserialize_network<real_t>(trailing), Error);
}

TEST_CASE("network hash tracks parameter changes") {
    auto net = make_micronet<real_t>({3, 8, 8}, 4);
    init_params(net, 4);
    auto other = net;
    CHECK(network_hash(net) == network_hash(other));
    other.layers[0].weight[0] += 0.25f;
    CHECK(network_hash(net) != network_hash(other));
}
