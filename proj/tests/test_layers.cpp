#include <doctest.h>

#include "bdlab/grad_check.hpp"
#include "bdlab/layers.hpp"
#include "bdlab/rng.hpp"

using namespace bdlab;

namespace {

TensorT<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    TensorT<double> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Values bounded away from zero so ReLU kinks never sit inside the
// finite-difference step.
TensorT<double> random_tensor_off_kink(const Shape& shape, Rng& rng) {
    TensorT<double> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double mag = rng.uniform(0.1, 1.0);
        t[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

// Checks analytic input/parameter gradients of dot(forward(layer, x), r)
// against central finite differences.
void check_layer_gradients(LayerT<double>& layer, const TensorT<double>& x, Rng& rng) {
    const TensorT<double> r = random_tensor(layer.out_shape, rng);
    auto back = backward_layer(layer, x, r);

    auto objective_x = [&](const TensorT<double>& probe) { return dot(forward_layer(layer, probe), r); };
    auto fd_x = finite_difference_grad<double>(objective_x, x, 1e-5);
    CHECK(max_relative_error(back.input_grad, fd_x) <= 1e-4);

    if (!layer.has_params()) return;
    auto objective_w = [&](const TensorT<double>& w) {
        LayerT<double> probe_layer = layer;
        probe_layer.weight = w;
        return dot(forward_layer(probe_layer, x), r);
    };
    auto fd_w = finite_difference_grad<double>(objective_w, layer.weight, 1e-5);
    CHECK(max_relative_error(back.weight_grad, fd_w) <= 1e-4);

    auto objective_b = [&](const TensorT<double>& b) {
        LayerT<double> probe_layer = layer;
        probe_layer.bias = b;
        return dot(forward_layer(probe_layer, x), r);
    };
    auto fd_b = finite_difference_grad<double>(objective_b, layer.bias, 1e-5);
    CHECK(max_relative_error(back.bias_grad, fd_b) <= 1e-4);
}

}  // namespace

TEST_CASE("relu forward matches definition") {
    auto layer = make_relu<double>();
    wire_layer(layer, Shape{3});
    TensorT<double> x({3}, {-1.0, 0.0, 2.0});
    auto y = forward_layer(layer, x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);
}

TEST_CASE("global_avg_pool of a constant image is the constant per channel") {
    auto layer = make_global_avg_pool<double>();
    wire_layer(layer, Shape{3, 5, 4});
    auto x = TensorT<double>::full({3, 5, 4}, 0.37);
    auto y = forward_layer(layer, x);
    CHECK(y.shape() == Shape{3});
    for (int c = 0; c < 3; ++c) CHECK(y[c] == doctest::Approx(0.37));
}

TEST_CASE("conv2d with 1x1 identity kernel reproduces the input") {
    auto layer = make_conv2d<double>(1, 1, 1, 0);
    wire_layer(layer, Shape{1, 4, 4});
    layer.weight[0] = 1.0;
    Rng rng(11);
    auto x = random_tensor({1, 4, 4}, rng);
    auto y = forward_layer(layer, x);
    CHECK(bitwise_equal(x, y));
}

TEST_CASE("forward_layer is pure: repeated calls are bitwise identical") {
    Rng rng(5);
    auto layer = make_conv2d<double>(4, 3, 1, 1);
    wire_layer(layer, Shape{2, 6, 6});
    for (std::size_t i = 0; i < layer.weight.size(); ++i) layer.weight[i] = rng.uniform(-1, 1);
    auto x = random_tensor({2, 6, 6}, rng);
    CHECK(bitwise_equal(forward_layer(layer, x), forward_layer(layer, x)));
}

TEST_CASE("forward_layer rejects mismatched input shape") {
    auto layer = make_linear<double>(3);
    wire_layer(layer, Shape{4});
    TensorT<double> bad({5});
    try {
        forward_layer(layer, bad);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
}

TEST_CASE("linear backward matches analytic W^T g and outer products") {
    auto layer = make_linear<double>(2);
    wire_layer(layer, Shape{3});
    // W = [[1,2,3],[4,5,6]], b = 0
    for (int i = 0; i < 6; ++i) layer.weight[i] = i + 1.0;
    TensorT<double> x({3}, {0.5, -1.0, 2.0});
    TensorT<double> g({2}, {10.0, -1.0});
    auto back = backward_layer(layer, x, g);
    // input_grad = W^T g
    CHECK(back.input_grad[0] == doctest::Approx(1 * 10.0 + 4 * -1.0));
    CHECK(back.input_grad[1] == doctest::Approx(2 * 10.0 + 5 * -1.0));
    CHECK(back.input_grad[2] == doctest::Approx(3 * 10.0 + 6 * -1.0));
    // weight_grad = g x^T, bias_grad = g
    CHECK(back.weight_grad[0] == doctest::Approx(10.0 * 0.5));
    CHECK(back.weight_grad[5] == doctest::Approx(-1.0 * 2.0));
    CHECK(back.bias_grad[0] == 10.0);
    CHECK(back.bias_grad[1] == -1.0);
}

TEST_CASE("relu backward masks the upstream gradient") {
    auto layer = make_relu<double>();
    wire_layer(layer, Shape{2});
    TensorT<double> x({2}, {-1.0, 2.0});
    TensorT<double> g({2}, {5.0, 5.0});
    auto back = backward_layer(layer, x, g);
    CHECK(back.input_grad[0] == 0.0);
    CHECK(back.input_grad[1] == 5.0);
}

TEST_CASE("random conv2d gradients match finite differences") {
    Rng rng(2024);
    auto layer = make_conv2d<double>(3, 3, 2, 1);
    wire_layer(layer, Shape{2, 7, 5});
    for (std::size_t i = 0; i < layer.weight.size(); ++i) layer.weight[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.uniform(-0.5, 0.5);
    auto x = random_tensor({2, 7, 5}, rng);
    check_layer_gradients(layer, x, rng);
}

TEST_CASE("every layer kind passes the finite-difference oracle on random shapes") {
    Rng rng(99);
    for (int probe = 0; probe < 8; ++probe) {
        const int c = 1 + static_cast<int>(rng.uniform_index(4));
        const int h = 3 + static_cast<int>(rng.uniform_index(6));
        const int w = 3 + static_cast<int>(rng.uniform_index(6));

        auto conv = make_conv2d<double>(1 + static_cast<int>(rng.uniform_index(4)),
                                        1 + static_cast<int>(rng.uniform_index(3)),
                                        1 + static_cast<int>(rng.uniform_index(2)),
                                        static_cast<int>(rng.uniform_index(2)));
        if (conv.kernel <= h + 2 * conv.padding && conv.kernel <= w + 2 * conv.padding) {
            wire_layer(conv, Shape{c, h, w});
            for (std::size_t i = 0; i < conv.weight.size(); ++i) conv.weight[i] = rng.uniform(-1, 1);
            auto x = random_tensor({c, h, w}, rng);
            check_layer_gradients(conv, x, rng);
        }

        auto relu = make_relu<double>();
        wire_layer(relu, Shape{c, h, w});
        auto xr = random_tensor_off_kink({c, h, w}, rng);
        check_layer_gradients(relu, xr, rng);

        auto gap = make_global_avg_pool<double>();
        wire_layer(gap, Shape{c, h, w});
        auto xg = random_tensor({c, h, w}, rng);
        check_layer_gradients(gap, xg, rng);

        auto flat = make_flatten<double>();
        wire_layer(flat, Shape{c, h, w});
        auto xf = random_tensor({c, h, w}, rng);
        check_layer_gradients(flat, xf, rng);

        auto lin = make_linear<double>(1 + static_cast<int>(rng.uniform_index(8)));
        wire_layer(lin, Shape{1 + static_cast<int>(rng.uniform_index(16))});
        for (std::size_t i = 0; i < lin.weight.size(); ++i) lin.weight[i] = rng.uniform(-1, 1);
        auto xl = random_tensor(lin.in_shape, rng);
        check_layer_gradients(lin, xl, rng);
    }
}

TEST_CASE("backward_layer rejects mismatched upstream shape") {
    auto layer = make_linear<double>(3);
    wire_layer(layer, Shape{4});
    TensorT<double> x({4});
    TensorT<double> bad_up({2});
    CHECK_THROWS_AS(backward_layer(layer, x, bad_up), Error);
}
