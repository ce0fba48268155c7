#include <doctest.h>

#include "bdlab/grad_check.hpp"
#include "bdlab/rng.hpp"
#include "bdlab/tensor.hpp"

using namespace bdlab;

TEST_CASE("tensor shape/data consistency is enforced") {
    TensorT<double> t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t[0] == 0.0);
    CHECK_THROWS_AS(TensorT<double>({2, 3}, std::vector<double>(5, 0.0)), Error);
    try {
        TensorT<double>({2, 2}, std::vector<double>(5, 0.0));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
}

TEST_CASE("tensor rejects non-positive dimensions") {
    CHECK_THROWS_AS(TensorT<float>({0, 3}), Error);
    CHECK_THROWS_AS(TensorT<float>({-1}), Error);
}

TEST_CASE("require_finite flags NaN and Inf") {
    TensorT<double> t({2});
    t[0] = std::nan("");
    CHECK_THROWS_AS(t.require_finite(ErrorKind::NonFiniteValue, "test"), Error);
    t[0] = 0.0;
    CHECK_NOTHROW(t.require_finite(ErrorKind::NonFiniteValue, "test"));
}

TEST_CASE("dot and norms") {
    TensorT<double> a({3}, {1.0, 2.0, 3.0});
    TensorT<double> b({3}, {4.0, -5.0, 6.0});
    CHECK(dot(a, b) == doctest::Approx(12.0));
    CHECK(l2_norm(a) == doctest::Approx(std::sqrt(14.0)));
    CHECK(linf_diff(a, b) == doctest::Approx(7.0));
}

TEST_CASE("bitwise_equal is exact") {
    TensorT<float> a({2}, {1.0f, 2.0f});
    TensorT<float> b = a;
    CHECK(bitwise_equal(a, b));
    b[1] = std::nextafter(2.0f, 3.0f);
    CHECK_FALSE(bitwise_equal(a, b));
}

TEST_CASE("finite_difference_grad on x^2 at 3 gives 6") {
    TensorT<double> x({1}, {3.0});
    auto grad = finite_difference_grad<double>(
        [](const TensorT<double>& p) { return p[0] * p[0]; }, x, 1e-5);
    CHECK(grad[0] == doctest::Approx(6.0).epsilon(1e-8));
}

TEST_CASE("finite_difference_grad of a constant is zero") {
    TensorT<double> x({4}, {0.1, -0.2, 0.3, 0.4});
    auto grad = finite_difference_grad<double>([](const TensorT<double>&) { return 7.5; }, x, 1e-5);
    for (std::size_t i = 0; i < grad.size(); ++i) CHECK(grad[i] == 0.0);
}

TEST_CASE("finite_difference_grad reports non-finite function values") {
    // The downward probe at -1e-3 drives log() to NaN.
    TensorT<double> x({1}, {0.0});
    CHECK_THROWS_AS(finite_difference_grad<double>(
                        [](const TensorT<double>& p) { return std::log(p[0]); }, x, 1e-3),
                    Error);
}

TEST_CASE("derive_seed is stable and tag-sensitive") {
    CHECK(derive_seed(42, "train") == derive_seed(42, "train"));
    CHECK(derive_seed(42, "train") != derive_seed(42, "val"));
    CHECK(derive_seed(42, "train") != derive_seed(43, "train"));
    CHECK(derive_seed(42, "x", 0) != derive_seed(42, "x", 1));
}

TEST_CASE("Rng draws are deterministic and in range") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) {
        double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    Rng c(7);
    std::vector<int> v{0, 1, 2, 3, 4, 5};
    auto w = v;
    c.shuffle(v);
    Rng d(7);
    d.shuffle(w);
    CHECK(v == w);
}
