#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "../support/gen.hpp"
#include "ivnet/autodiff/grad_check.hpp"
#include "ivnet/autodiff/graph.hpp"
#include "ivnet/autodiff/tensor.hpp"

namespace ad = ivnet::ad;
using ad::Tensor;

namespace {

std::vector<double> as_vec(const Tensor &t) { return {t.data().begin(), t.data().end()}; }

// Naive row-major product, independent of the library kernel.
std::vector<double> naive_matmul(const std::vector<double> &a, const std::vector<double> &b, std::size_t m,
                                 std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t p = 0; p < k; ++p) {
                c[i * n + j] += a[i * k + p] * b[p * n + j];
            }
        }
    }
    return c;
}

void expect_grad_ok(const std::function<Tensor()> &f, std::vector<ad::NamedTensor> params) {
    const auto report = ad::grad_check(f, std::move(params));
    EXPECT_TRUE(report.passed) << report.worst << " rel=" << report.max_rel_error;
}

}  // namespace

TEST(Matmul, Examples) {
    const Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
    EXPECT_EQ(as_vec(ad::matmul(Tensor::matrix(2, 2, {1, 0, 0, 1}), a)), (std::vector<double>{1, 2, 3, 4}));
    EXPECT_EQ(as_vec(ad::matmul(a, Tensor::matrix(2, 1, {0, 0}))), (std::vector<double>{0, 0}));
    const Tensor c = ad::matmul(a, Tensor::matrix(2, 1, {5, 6}));
    EXPECT_EQ(c.shape(), (ad::Shape{2, 1}));
    EXPECT_EQ(as_vec(c), (std::vector<double>{17, 39}));
}

TEST(Matmul, MatchesNaiveProductOnRandomShapes) {
    ivnet::Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = gen::between(rng, 1, 5), k = gen::between(rng, 1, 5), n = gen::between(rng, 1, 5);
        const Tensor a = gen::tensor(rng, {m, k}, false);
        const Tensor b = gen::tensor(rng, {k, n}, false);
        const auto expected = naive_matmul(as_vec(a), as_vec(b), m, k, n);
        const auto got = as_vec(ad::matmul(a, b));
        ASSERT_EQ(got.size(), expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_NEAR(got[i], expected[i], 1e-12);
        }
    }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    try {
        (void)ad::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 2}));
        FAIL() << "expected DimensionError";
    } catch (const ivnet::DimensionError &e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[2x2]"), std::string::npos) << msg;
    }
}

TEST(Elementwise, Examples) {
    EXPECT_EQ(ad::tanh(Tensor::scalar(0.0)).item(), 0.0);
    EXPECT_EQ(ad::sigmoid(Tensor::scalar(0.0)).item(), 0.5);
    EXPECT_NEAR(ad::tanh(Tensor::scalar(1.0)).item(), 0.761594, 5e-7);
    EXPECT_THROW((void)ad::add(Tensor::zeros({2}), Tensor::zeros({3})), ivnet::DimensionError);
    EXPECT_THROW((void)ad::mul(Tensor::zeros({2, 2}), Tensor::zeros({4})), ivnet::DimensionError);
}

TEST(Elementwise, ScalarBroadcast) {
    const Tensor s = Tensor::scalar(2.0, true);
    const Tensor v = Tensor::vector({1, 2, 3}, true);
    EXPECT_EQ(as_vec(s * v), (std::vector<double>{2, 4, 6}));
    expect_grad_ok([&] { return ad::sum(ad::mul(s, ad::tanh(v))); }, {{"s", s}, {"v", v}});
    // single-element vector keeps its rank on either side
    const Tensor one = Tensor::vector({4.0});
    EXPECT_EQ((s * one).shape(), one.shape());
    EXPECT_EQ((one * s).shape(), one.shape());
    EXPECT_EQ((s * s).shape(), s.shape());
}

TEST(Elementwise, SigmoidIsStableForLargeInputs) {
    const Tensor s = ad::sigmoid(Tensor::vector({-800, 800}));
    EXPECT_EQ(s[0], 0.0);
    EXPECT_EQ(s[1], 1.0);
}

TEST(Softmax, Examples) {
    EXPECT_EQ(as_vec(ad::softmax(Tensor::vector({-3.7}))), (std::vector<double>{1.0}));
    const Tensor uniform = ad::softmax(Tensor::vector({0.3, 0.3, 0.3}));
    for (const double x : uniform.data()) {
        EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
    }
    const Tensor s = ad::softmax(Tensor::vector({std::numbers::ln2, 0.0}));
    EXPECT_NEAR(s[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(s[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, RejectsNonFinite) {
    EXPECT_THROW((void)ad::softmax(Tensor::vector({1.0, NAN})), ivnet::NumericError);
    EXPECT_THROW((void)ad::softmax(Tensor::vector({INFINITY, 0.0})), ivnet::NumericError);
}

TEST(Softmax, SimplexAndShiftInvarianceProperty) {
    ivnet::Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = gen::between(rng, 1, 8);
        auto logits = gen::values(rng, k, -30, 30);
        const Tensor s = ad::softmax(Tensor::vector(logits));
        double total = 0.0;
        std::size_t argmax = 0;
        for (std::size_t i = 0; i < k; ++i) {
            EXPECT_GT(s[i], 0.0);
            total += s[i];
            argmax = s[i] > s[argmax] ? i : argmax;
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
        const double c = rng.uniform(-100, 100);
        for (double &x : logits) {
            x += c;
        }
        const Tensor shifted = ad::softmax(Tensor::vector(logits));
        std::size_t argmax2 = 0;
        for (std::size_t i = 0; i < k; ++i) {
            argmax2 = shifted[i] > shifted[argmax2] ? i : argmax2;
        }
        EXPECT_EQ(argmax, argmax2);
    }
}

TEST(Concat, Examples) {
    EXPECT_EQ(as_vec(ad::concat(Tensor::vector({1, 2}), Tensor::vector({3}))), (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(as_vec(ad::concat(Tensor::vector({}), Tensor::vector({5}))), (std::vector<double>{5}));
    EXPECT_EQ(as_vec(ad::concat(Tensor::vector({0.5}), Tensor::vector({0.25, 0.125}))),
              (std::vector<double>{0.5, 0.25, 0.125}));
    EXPECT_THROW((void)ad::concat(Tensor::zeros({1, 2}), Tensor::vector({1})), ivnet::DimensionError);
}

TEST(Concat, ThenSplitIsIdentityOnValuesAndGradients) {
    ivnet::Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t p = gen::between(rng, 1, 5), q = gen::between(rng, 1, 5);
        const Tensor a = gen::tensor(rng, {p});
        const Tensor b = gen::tensor(rng, {q});
        const Tensor joined = ad::concat(a, b);
        const Tensor left = ad::slice(joined, 0, p);
        const Tensor right = ad::slice(joined, p, q);
        EXPECT_EQ(as_vec(left), as_vec(a));
        EXPECT_EQ(as_vec(right), as_vec(b));
        const Tensor wa = gen::tensor(rng, {p}, false);
        const Tensor wb = gen::tensor(rng, {q}, false);
        ad::backward(ad::dot(wa, left) + ad::dot(wb, right));
        EXPECT_EQ(std::vector<double>(a.grad().begin(), a.grad().end()), as_vec(wa));
        EXPECT_EQ(std::vector<double>(b.grad().begin(), b.grad().end()), as_vec(wb));
    }
}

TEST(CrossEntropy, Examples) {
    EXPECT_NEAR(ad::cross_entropy(Tensor::vector({20, -20}), 0).item(), 0.0, 1e-15);
    EXPECT_NEAR(ad::cross_entropy(Tensor::vector({0, 0}), 1).item(), std::log(2.0), 1e-15);
    EXPECT_NEAR(ad::cross_entropy(Tensor::vector({0, std::log(3.0)}), 0).item(), std::log(4.0), 1e-15);
}

TEST(CrossEntropy, NonNegativeAndLn2AtZero) {
    ivnet::Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t label = rng.below(2);
        EXPECT_GE(ad::cross_entropy(Tensor::vector(gen::values(rng, 2, -50, 50)), label).item(), 0.0);
    }
    EXPECT_EQ(ad::cross_entropy(Tensor::vector({0, 0}), 0).item(), std::log(2.0));
    EXPECT_EQ(ad::cross_entropy(Tensor::vector({0, 0}), 1).item(), std::log(2.0));
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
    const Tensor logits = Tensor::vector({0.4, -1.1}, true);
    ad::backward(ad::cross_entropy(logits, 1));
    const double p0 = std::exp(0.4) / (std::exp(0.4) + std::exp(-1.1));
    EXPECT_NEAR(logits.grad()[0], p0, 1e-15);
    EXPECT_NEAR(logits.grad()[1], (1.0 - p0) - 1.0, 1e-15);
}

TEST(Backward, Examples) {
    const Tensor x = Tensor::scalar(3.0, true);
    ad::backward(x * x);
    EXPECT_EQ(x.grad()[0], 6.0);

    const Tensor y = Tensor::scalar(0.0, true);
    ad::backward(ad::tanh(y));
    EXPECT_EQ(y.grad()[0], 1.0);
}

TEST(Backward, Errors) {
    const Tensor x = Tensor::vector({1, 2}, true);
    EXPECT_THROW(ad::backward(ad::tanh(x)), ivnet::GraphError);  // not scalar

    const Tensor loss = ad::sum(ad::tanh(x));
    ad::backward(loss);
    EXPECT_THROW(ad::backward(loss), ivnet::GraphError);  // consumed

    EXPECT_THROW(ad::backward(Tensor::scalar(1.0)), ivnet::GraphError);  // nothing to differentiate
}

TEST(Backward, ConsumedNodesCannotBeReused) {
    const Tensor x = Tensor::vector({1, 2}, true);
    const Tensor h = ad::tanh(x);
    ad::backward(ad::sum(h));
    EXPECT_THROW((void)ad::sum(h), ivnet::GraphError);
}

TEST(Backward, AccumulatesAcrossCallsUntilZeroed) {
    const Tensor x = Tensor::scalar(2.0, true);
    ad::backward(x * x);
    ad::backward(x * x);
    EXPECT_EQ(x.grad()[0], 8.0);
    Tensor y = x;
    y.zero_grad();
    EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Backward, SharedSubexpressionVisitedOnce) {
    // z = h * h with h = tanh(x): dz/dx = 2 h (1 - h^2)
    const Tensor x = Tensor::scalar(0.7, true);
    const Tensor h = ad::tanh(x);
    ad::backward(h * h);
    const double t = std::tanh(0.7);
    EXPECT_NEAR(x.grad()[0], 2 * t * (1 - t * t), 1e-15);
}

TEST(GradCheck, Examples) {
    const Tensor x = Tensor::vector({0.3, -1.2, 2.0}, true);
    const auto report = ad::grad_check([&] { return ad::sum(x * x); }, {{"x", x}});
    EXPECT_TRUE(report.passed);
    EXPECT_LT(report.max_rel_error, 1e-8);
    EXPECT_EQ(report.checked, 3u);
}

TEST(GradCheck, RejectsEpsOutsideRange) {
    const Tensor x = Tensor::vector({1.0}, true);
    ad::GradCheckOptions opt;
    opt.eps = 1e-3;
    EXPECT_THROW((void)ad::grad_check([&] { return ad::sum(x); }, {{"x", x}}, opt), ivnet::Error);
}

TEST(GradCheck, DetectsAWrongGradient) {
    // A hand-written op whose backward is off by a factor of two.
    const Tensor x = Tensor::vector({0.5, 1.5}, true);
    const auto broken = [&] {
        auto xi = x.impl();
        std::vector<double> out{x[0] * x[0] + x[1] * x[1]};
        return ad::make_result({}, std::move(out), "broken", {x}, [xi](const ad::TensorImpl &o) {
            auto &g = xi->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += o.grad[0] * 4.0 * xi->data[i];
            }
        });
    };
    EXPECT_FALSE(ad::grad_check(broken, {{"x", x}}).passed);
}

TEST(GradCheck, NonFiniteObjectiveThrows) {
    const Tensor x = Tensor::vector({1.0}, true);
    bool poisoned = false;
    const auto f = [&] {
        const Tensor y = ad::sum(x * x);
        if (poisoned) {
            return ad::scale(y, NAN);
        }
        poisoned = true;
        return y;
    };
    EXPECT_THROW((void)ad::grad_check(f, {{"x", x}}), ivnet::NumericError);
}

// Every differentiable primitive on random inputs in [-2, 2].
TEST(GradCheck, EveryPrimitiveOnRandomInputs) {
    ivnet::Rng rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = gen::between(rng, 1, 5);
        const std::size_t m = gen::between(rng, 1, 4);
        const Tensor a = gen::tensor(rng, {n});
        const Tensor b = gen::tensor(rng, {n});
        const Tensor s = gen::tensor(rng, {});
        const Tensor w = gen::tensor(rng, {m, n});
        const Tensor mat = gen::tensor(rng, {n, m});
        const Tensor table = gen::tensor(rng, {4, n});
        const Tensor probe = gen::tensor(rng, {n}, false);
        const Tensor probe_m = gen::tensor(rng, {m}, false);
        const auto proj = [&](const Tensor &t) { return ad::dot(probe, t); };

        expect_grad_ok([&] { return proj(ad::add(a, b)); }, {{"a", a}, {"b", b}});
        expect_grad_ok([&] { return proj(ad::sub(a, b)); }, {{"a", a}, {"b", b}});
        expect_grad_ok([&] { return proj(ad::mul(a, b)); }, {{"a", a}, {"b", b}});
        expect_grad_ok([&] { return proj(ad::mul(s, a)); }, {{"s", s}, {"a", a}});
        expect_grad_ok([&] { return proj(ad::tanh(a)); }, {{"a", a}});
        expect_grad_ok([&] { return proj(ad::sigmoid(a)); }, {{"a", a}});
        expect_grad_ok([&] { return proj(ad::scale(a, -1.7)); }, {{"a", a}});
        expect_grad_ok([&] { return ad::dot(probe_m, ad::matmul(w, a)); }, {{"w", w}, {"a", a}});
        expect_grad_ok([&] { return ad::sum(ad::mul(ad::matmul(w, mat), ad::matmul(w, mat))); },
                       {{"w", w}, {"mat", mat}});
        expect_grad_ok([&] { return ad::dot(a, b); }, {{"a", a}, {"b", b}});
        expect_grad_ok([&] { return ad::sum(ad::mul(a, a)); }, {{"a", a}});
        expect_grad_ok([&] { return ad::dot(ad::concat(a, b), ad::concat(probe, probe)); }, {{"a", a}, {"b", b}});
        expect_grad_ok([&] { return proj(ad::row(table, 2)) + proj(ad::row(table, 2)); }, {{"table", table}});
        expect_grad_ok(
            [&] {
                const Tensor sl = ad::slice(a, 0, 1);
                return ad::sum(ad::mul(sl, sl));
            },
            {{"a", a}});
        expect_grad_ok(
            [&] {
                std::vector<Tensor> parts{ad::dot(a, probe), ad::sum(b), s};
                return ad::dot(ad::stack(parts), Tensor::vector({0.3, -0.8, 1.1}));
            },
            {{"a", a}, {"b", b}, {"s", s}});
        expect_grad_ok([&] { return proj(ad::softmax(a)); }, {{"a", a}});
        expect_grad_ok([&] { return ad::cross_entropy(ad::slice(ad::concat(a, b), 0, 2), trial % 2); },
                       {{"a", a}, {"b", b}});
        expect_grad_ok(
            [&] {
                std::vector<Tensor> vs{a, b, ad::tanh(a)};
                return proj(ad::weighted_sum(ad::softmax(Tensor::vector({0.1, 0.2, 0.3}) + ad::slice(
                                                                                                ad::concat(b, b), 0, 3)),
                                             vs));
            },
            {{"a", a}, {"b", b}});
    }
}

TEST(Tensor, ShapeMustMatchData) {
    EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ivnet::DimensionError);
    EXPECT_EQ(Tensor::zeros({3, 4}).size(), 12u);
}
