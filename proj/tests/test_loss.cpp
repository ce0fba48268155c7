#include <doctest.h>

#include <cmath>

#include "bdlab/grad_check.hpp"
#include "bdlab/loss.hpp"
#include "bdlab/rng.hpp"

using namespace bdlab;

TEST_CASE("uniform logits give exactly ln(m) and centered gradient") {
    for (int m : {2, 4, 10}) {
        auto logits = TensorT<double>::full({m}, 1.7);
        auto [loss, grad] = softmax_cross_entropy(logits, 1);
        CHECK(loss == std::log(static_cast<double>(m)));  // exact, by construction
        CHECK(grad[1] == doctest::Approx(1.0 / m - 1.0));
        for (int i = 0; i < m; ++i)
            if (i != 1) CHECK(grad[i] == doctest::Approx(1.0 / m));
    }
}

TEST_CASE("loss is non-negative") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        TensorT<double> logits({5});
        for (int i = 0; i < 5; ++i) logits[i] = rng.uniform(-4, 4);
        auto [loss, grad] = softmax_cross_entropy(logits, static_cast<int>(rng.uniform_index(5)));
        (void)grad;
        CHECK(loss >= 0.0);
    }
}

TEST_CASE("extreme logits stay finite via max-subtraction") {
    TensorT<double> logits({2}, {1000.0, 0.0});
    auto [loss, grad] = softmax_cross_entropy(logits, 0);
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(0.0));
    CHECK(std::isfinite(grad[0]));
    CHECK(std::isfinite(grad[1]));
}

TEST_CASE("label out of range is rejected") {
    TensorT<double> logits({3});
    try {
        softmax_cross_entropy(logits, 3);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::LabelOutOfRange);
    }
    CHECK_THROWS_AS(softmax_cross_entropy(logits, -1), Error);
}

TEST_CASE("cross-entropy gradient matches finite differences to 1e-6 relative") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 2 + static_cast<int>(rng.uniform_index(7));
        TensorT<double> logits({m});
        for (int i = 0; i < m; ++i) logits[i] = rng.uniform(-3, 3);
        const int label = static_cast<int>(rng.uniform_index(m));
        auto [loss, grad] = softmax_cross_entropy(logits, label);
        (void)loss;
        auto fd = finite_difference_grad<double>(
            [&](const TensorT<double>& p) { return softmax_cross_entropy(p, label).first; }, logits,
            1e-6);
        CHECK(max_relative_error(grad, fd, 1e-6) <= 1e-6);
    }
}

TEST_CASE("softmax sums to one") {
    Rng rng(9);
    TensorT<double> logits({6});
    for (int i = 0; i < 6; ++i) logits[i] = rng.uniform(-5, 5);
    auto p = softmax(logits);
    double sum = 0;
    for (int i = 0; i < 6; ++i) {
        CHECK(p[i] >= 0.0);
        sum += p[i];
    }
    CHECK(sum == doctest::Approx(1.0));
}
