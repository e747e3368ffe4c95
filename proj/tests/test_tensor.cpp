#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gan2vec/nn.hpp"
#include "gan2vec/tensor.hpp"
#include "support/fd.hpp"

using namespace gan2vec;
using testsup::dot;
using testsup::fd_grad;
using testsup::max_rel_err;

namespace {

// Accumulated-grad helper: fresh backward pass, returns d(loss)/d(t).
std::vector<double> grad_of(const std::function<Tensor()>& loss_fn, Tensor t) {
    t.zero_grad();
    Tensor loss = loss_fn();
    backward(loss);
    return t.grad();
}

}  // namespace

TEST_CASE("tensor creation and basic accessors") {
    Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK(t.dim(0) == 2);
    CHECK(t.dim(1) == 3);
    CHECK_FALSE(t.tracked());
    CHECK(Tensor::scalar(4.5).scalar_value() == 4.5);
    CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(Tensor::from_values({0, 2}, {}), DimensionError);
    CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1, 2, 3, 4}).scalar_value(), DimensionError);
}

TEST_CASE("elementwise ops: values and shape checks") {
    Tensor a = Tensor::from_values({3}, {1.0, -2.0, 3.0});
    Tensor b = Tensor::from_values({3}, {4.0, 5.0, -6.0});
    CHECK(add(a, b).values() == std::vector<double>{5.0, 3.0, -3.0});
    CHECK(sub(a, b).values() == std::vector<double>{-3.0, -7.0, 9.0});
    CHECK(mul(a, b).values() == std::vector<double>{4.0, -10.0, -18.0});
    CHECK(scale(a, 2.0).values() == std::vector<double>{2.0, -4.0, 6.0});
    CHECK(shift(a, 1.0).values() == std::vector<double>{2.0, -1.0, 4.0});
    CHECK(neg(a).values() == std::vector<double>{-1.0, 2.0, -3.0});
    Tensor c = Tensor::from_values({2}, {1.0, 2.0});
    CHECK_THROWS_AS(add(a, c), DimensionError);
    CHECK_THROWS_AS(mul(a, c), DimensionError);
}

TEST_CASE("unary math ops match std") {
    Tensor a = Tensor::from_values({4}, {0.5, 1.0, 2.0, 3.5});
    for (int i = 0; i < 4; ++i) {
        CHECK(exp(a).values()[i] == doctest::Approx(std::exp(a.values()[i])).epsilon(1e-14));
        CHECK(log(a).values()[i] == doctest::Approx(std::log(a.values()[i])).epsilon(1e-14));
        CHECK(sqrt(a).values()[i] == doctest::Approx(std::sqrt(a.values()[i])).epsilon(1e-14));
    }
    // sigmoid/softplus stable at extreme inputs
    Tensor big = Tensor::from_values({4}, {-800.0, -30.0, 30.0, 800.0});
    CHECK(sigmoid(big).values()[0] == 0.0);
    CHECK(sigmoid(big).values()[3] == 1.0);
    CHECK(softplus(big).values()[0] == 0.0);
    CHECK(softplus(big).values()[3] == 800.0);
    CHECK(softplus(Tensor::scalar(0.0)).scalar_value() == doctest::Approx(std::log(2.0)));
    CHECK(sigmoid(Tensor::scalar(0.0)).scalar_value() == 0.5);
}

TEST_CASE("leaky_relu values") {
    Tensor x = Tensor::from_values({4}, {-2.0, -0.5, 0.0, 3.0});
    Tensor y = leaky_relu(x, 0.2);
    CHECK(y.values() == std::vector<double>{-0.4, -0.1, 0.0, 3.0});
}

TEST_CASE("matmul values and errors") {
    Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_values({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor y = matmul(a, b);
    CHECK(y.shape() == Shape{2, 2});
    CHECK(y.values() == std::vector<double>{58, 64, 139, 154});
    CHECK_THROWS_AS(matmul(a, a), DimensionError);
    CHECK_THROWS_AS(matmul(a, Tensor::from_values({3}, {1, 2, 3})), DimensionError);
    CHECK(transpose(a).values() == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("broadcast_to and sum_to are exact adjoints") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Shape big{2 + trial % 3, 3, 2, 4};
        Shape small{1, 3, 1, 4};
        if (trial % 2) small = {3, 1, 1};  // trailing-aligned lower rank
        Tensor a = Tensor::randn(small, rng);
        Tensor g = Tensor::randn(big, rng);
        // <broadcast(a), g> == <a, sum_to(g)>
        const double lhs = dot(broadcast_to(a, big).values(), g.values());
        const double rhs = dot(a.values(), sum_to(g, small).values());
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
    CHECK_THROWS_AS(broadcast_to(Tensor::from_values({3}, {1, 2, 3}), {2, 2}), DimensionError);
    CHECK_THROWS_AS(sum_to(Tensor::from_values({4}, {1, 2, 3, 4}), {3}), DimensionError);
}

TEST_CASE("sum_to collapses the marked axes") {
    Tensor x = Tensor::from_values({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    CHECK(sum_to(x, {1, 2, 1}).values() == std::vector<double>{1 + 2 + 5 + 6, 3 + 4 + 7 + 8});
    CHECK(sum_all(x).scalar_value() == 36.0);
    CHECK(mean_all(x).scalar_value() == 4.5);
}

TEST_CASE("concat and slice along axis 1") {
    Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_values({2, 1}, {9, 10});
    Tensor c = concat_axis1({a, b});
    CHECK(c.shape() == Shape{2, 3});
    CHECK(c.values() == std::vector<double>{1, 2, 9, 3, 4, 10});
    CHECK(slice_axis1(c, 2, 1).values() == std::vector<double>{9, 10});
    CHECK(slice_axis1(c, 0, 2).values() == a.values());
    CHECK_THROWS_AS(slice_axis1(c, 2, 2), DimensionError);
    CHECK_THROWS_AS(concat_axis1({a, Tensor::from_values({3, 1}, {1, 2, 3})}), DimensionError);
}

TEST_CASE("conv2d hand examples") {
    // 2x2 identity-diagonal kernel over a 2x2 input: single output 1*1 + 4*1.
    Tensor x = Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor k = Tensor::from_values({1, 1, 2, 2}, {1, 0, 0, 1});
    Tensor y = conv2d(x, k, {1, 1}, {0, 0});
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.scalar_value() == 5.0);

    // 1x1 kernel is a per-pixel scale.
    Tensor k1 = Tensor::from_values({1, 1, 1, 1}, {3.0});
    CHECK(conv2d(x, k1, {1, 1}, {0, 0}).values() == std::vector<double>{3, 6, 9, 12});

    // Stride-2 with padding 1 on a 5x5 ramp: output is 3x3.
    Rng rng(3);
    Tensor x5 = Tensor::randn({2, 3, 5, 5}, rng);
    Tensor k5 = Tensor::randn({4, 3, 3, 3}, rng);
    CHECK(conv2d(x5, k5, {2, 2}, {1, 1}).shape() == Shape{2, 4, 3, 3});
    CHECK(conv2d(x5, k5, {1, 1}, {0, 0}).shape() == Shape{2, 4, 3, 3});

    CHECK_THROWS_AS(conv2d(x5, Tensor::randn({4, 2, 3, 3}, rng), {1, 1}, {0, 0}),
                    DimensionError);
    CHECK_THROWS_AS(conv2d(x5, Tensor::randn({4, 3, 7, 7}, rng), {1, 1}, {0, 0}),
                    DimensionError);
    CHECK_THROWS_AS(conv2d(x5, k5, {0, 1}, {0, 0}), DimensionError);
}

TEST_CASE("conv_transpose2d places kernel copies and validates sizes") {
    // Single input pixel, stride 2: the output is v * kernel in the corner.
    Tensor y = Tensor::from_values({1, 1, 1, 1}, {2.0});
    Tensor k = Tensor::from_values({1, 1, 2, 2}, {1, 10, 100, 1000});
    Tensor x = conv_transpose2d(y, k, {2, 2}, {0, 0}, 2, 2);
    CHECK(x.values() == std::vector<double>{2, 20, 200, 2000});

    // Two pixels at stride 2 with a 3-wide kernel overlap in the middle.
    Tensor y2 = Tensor::from_values({1, 1, 1, 2}, {1.0, 1.0});
    Tensor k2 = Tensor::from_values({1, 1, 1, 3}, {1, 2, 3});
    Tensor x2 = conv_transpose2d(y2, k2, {1, 2}, {0, 0}, 1, 5);
    CHECK(x2.values() == std::vector<double>{1, 2, 3 + 1, 2, 3});

    // Both floor-consistent output sizes are accepted, inconsistent rejected.
    Rng rng(5);
    Tensor y3 = Tensor::randn({1, 2, 2, 2}, rng);
    Tensor k3 = Tensor::randn({2, 1, 3, 3}, rng);
    CHECK(conv_transpose2d(y3, k3, {2, 2}, {0, 0}, 5, 5).shape() == Shape{1, 1, 5, 5});
    CHECK(conv_transpose2d(y3, k3, {2, 2}, {0, 0}, 6, 6).shape() == Shape{1, 1, 6, 6});
    CHECK_THROWS_AS(conv_transpose2d(y3, k3, {2, 2}, {0, 0}, 4, 5), DimensionError);
    CHECK_THROWS_AS(conv_transpose2d(y3, k3, {2, 2}, {0, 0}, 7, 5), DimensionError);
}

TEST_CASE("conv2d and conv_transpose2d are exact adjoints") {
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const std::int64_t B = 1 + trial % 3, Ci = 1 + trial % 2, Co = 1 + (trial / 2) % 3;
        const std::int64_t H = 4 + trial % 5, W = 3 + trial % 6;
        const std::int64_t kh = 1 + trial % 3, kw = 1 + (trial + 1) % 3;
        const Extent stride{1 + trial % 2, 1 + (trial + 1) % 2};
        const Extent pad{trial % 2, (trial / 2) % 2};
        if (H + 2 * pad.h < kh || W + 2 * pad.w < kw) continue;
        Tensor x = Tensor::randn({B, Ci, H, W}, rng);
        Tensor k = Tensor::randn({Co, Ci, kh, kw}, rng);
        Tensor cx = conv2d(x, k, stride, pad);
        Tensor y = Tensor::randn(cx.shape(), rng);
        // <conv(x,k), y> == <x, convT(y,k)>
        const double lhs = dot(cx.values(), y.values());
        const double rhs = dot(x.values(), conv_transpose2d(y, k, stride, pad, H, W).values());
        CHECK(std::fabs(lhs - rhs) <= 1e-10 * std::max(1.0, std::fabs(lhs)));
    }
}

TEST_CASE("gradients of elementwise and structural ops match finite differences") {
    Rng rng(23);
    Tensor x = Tensor::randn({2, 3}, rng, 0.0, 1.0, true);
    Tensor w = Tensor::randn({3, 4}, rng, 0.0, 1.0, true);

    auto check_against_fd = [&](const std::function<Tensor()>& f, Tensor t,
                                double tol = 1e-6) {
        auto analytic = grad_of(f, t);
        auto numeric = fd_grad(t, [&] { return f().scalar_value(); });
        CHECK(max_rel_err(analytic, numeric) < tol);
    };

    check_against_fd([&] { return sum_all(mul(x, x)); }, x);
    check_against_fd([&] { return sum_all(exp(scale(x, 0.3))); }, x);
    check_against_fd([&] { return sum_all(sigmoid(x)); }, x);
    check_against_fd([&] { return sum_all(softplus(x)); }, x);
    check_against_fd([&] { return sum_all(leaky_relu(x, 0.2)); }, x);
    check_against_fd([&] { return sum_all(matmul(x, w)); }, x);
    check_against_fd([&] { return sum_all(matmul(x, w)); }, w);
    check_against_fd([&] { return mean_all(divide(x, shift(mul(x, x), 3.0))); }, x);
    check_against_fd([&] { return sum_all(sqrt(shift(mul(x, x), 1.0))); }, x);
    check_against_fd([&] { return sum_all(broadcast_to(sum_to(x, {2, 1}), {2, 3})); }, x);
    check_against_fd([&] { return sum_all(mul(slice_axis1(x, 1, 2), slice_axis1(x, 0, 2))); },
                     x);
    check_against_fd(
        [&] {
            Tensor c = concat_axis1({x, mul(x, x)});
            return sum_all(mul(c, c));
        },
        x);
}

TEST_CASE("simple backward identities") {
    Tensor x = Tensor::from_values({3}, {1.0, 2.0, 3.0}, true);
    backward(sum_all(x));
    CHECK(x.grad() == std::vector<double>{1, 1, 1});

    x.zero_grad();
    backward(sum_all(mul(x, x)));
    CHECK(x.grad() == std::vector<double>{2, 4, 6});

    // Fan-out accumulates: d(sum(x + x))/dx = 2.
    x.zero_grad();
    backward(sum_all(add(x, x)));
    CHECK(x.grad() == std::vector<double>{2, 2, 2});

    CHECK_THROWS_AS(backward(mul(x, x)), DimensionError);         // non-scalar
    CHECK_THROWS_AS(backward(Tensor::scalar(1.0)), ConfigError);  // untracked
}

TEST_CASE("backward(wrt) restricts accumulation and skips unrelated branches") {
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor y = Tensor::from_values({2}, {3.0, 4.0}, true);
    Tensor loss = sum_all(mul(x, y));
    backward(loss, {x});
    CHECK(x.grad() == std::vector<double>{3, 4});
    CHECK_FALSE(y.has_grad());
}

TEST_CASE("conv gradients match finite differences") {
    Rng rng(31);
    Tensor x = Tensor::randn({1, 2, 6, 8}, rng, 0.0, 1.0, true);
    Tensor k = Tensor::randn({3, 2, 3, 3}, rng, 0.0, 1.0, true);
    auto loss = [&] {
        Tensor y = conv2d(x, k, {2, 2}, {1, 1});
        return sum_all(mul(y, y));
    };
    for (Tensor t : {x, k}) {
        auto analytic = grad_of(loss, t);
        auto numeric = fd_grad(t, [&] { return loss().scalar_value(); });
        CHECK(max_rel_err(analytic, numeric) < 1e-4);
    }

    Tensor y0 = Tensor::randn({1, 3, 2, 3}, rng, 0.0, 1.0, true);
    Tensor kt = Tensor::randn({3, 2, 3, 3}, rng, 0.0, 1.0, true);
    auto loss_t = [&] {
        Tensor z = conv_transpose2d(y0, kt, {2, 2}, {1, 1}, 3, 5);
        return sum_all(mul(z, z));
    };
    for (Tensor t : {y0, kt}) {
        auto analytic = grad_of(loss_t, t);
        auto numeric = fd_grad(t, [&] { return loss_t().scalar_value(); });
        CHECK(max_rel_err(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("fully_connected forward and gradient") {
    Tensor x = Tensor::from_values({1, 2}, {1.0, 2.0}, true);
    Tensor w = Tensor::from_values({2, 1}, {3.0, -1.0}, true);
    Tensor b = Tensor::from_values({1}, {5.0}, true);
    CHECK(fully_connected(x, w, b).scalar_value() == 6.0);
    CHECK_THROWS_AS(fully_connected(x, Tensor::from_values({3, 1}, {1, 2, 3}), b),
                    DimensionError);

    auto loss = [&] { return sum_all(sigmoid(fully_connected(x, w, b))); };
    for (Tensor t : {x, w, b}) {
        auto analytic = grad_of(loss, t);
        auto numeric = fd_grad(t, [&] { return loss().scalar_value(); });
        CHECK(max_rel_err(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("batch_norm normalizes with batch statistics in train mode") {
    Rng rng(41);
    Tensor x = Tensor::randn({4, 3, 2, 2}, rng, 5.0, 2.0, true);
    Tensor gamma = Tensor::full({3}, 1.0, true);
    Tensor beta = Tensor::zeros({3}, true);
    BatchNormStats stats;
    Tensor y = batch_norm(x, gamma, beta, 1e-5, BnMode::train, stats, 0.1);

    // Per-channel mean ~0 and variance ~1 after normalization.
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0, sq = 0.0;
        int n = 0;
        for (int b = 0; b < 4; ++b)
            for (int i = 0; i < 4; ++i) {
                double v = y.values()[(b * 3 + c) * 4 + i];
                sum += v;
                sq += v * v;
                ++n;
            }
        CHECK(std::fabs(sum / n) < 1e-10);
        CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-4));
    }

    // Constant channel maps to beta exactly (variance 0 + eps guard).
    Tensor xc = Tensor::full({2, 1, 2, 2}, 7.0, true);
    BatchNormStats s2;
    Tensor yc = batch_norm(xc, Tensor::full({1}, 1.0, true), Tensor::full({1}, 0.5, true), 1e-5,
                           BnMode::train, s2, 0.1);
    for (double v : yc.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(batch_norm(Tensor::randn({1, 3, 2, 2}, rng), gamma, beta, 1e-5,
                               BnMode::train, stats, 0.1),
                    DimensionError);
}

TEST_CASE("batch_norm infer mode uses running statistics") {
    Rng rng(43);
    Tensor gamma = Tensor::full({2}, 2.0, true);
    Tensor beta = Tensor::full({2}, 1.0, true);
    BatchNormStats stats;
    stats.mean = {1.0, -1.0};
    stats.var = {4.0, 0.25};
    Tensor x = Tensor::from_values({1, 2, 1, 1}, {3.0, 0.0});
    Tensor y = batch_norm(x, gamma, beta, 0.0, BnMode::infer, stats, 0.1);
    CHECK(y.values()[0] == doctest::Approx(2.0 * (3.0 - 1.0) / 2.0 + 1.0));
    CHECK(y.values()[1] == doctest::Approx(2.0 * (0.0 + 1.0) / 0.5 + 1.0));
    // Infer mode must not touch the running buffers.
    CHECK(stats.mean == std::vector<double>{1.0, -1.0});
}

TEST_CASE("batch_norm gradients match finite differences") {
    Rng rng(47);
    Tensor x = Tensor::randn({3, 2, 2, 2}, rng, 0.0, 1.0, true);
    Tensor gamma = Tensor::uniform({2}, rng, 0.5, 1.5, true);
    Tensor beta = Tensor::randn({2}, rng, 0.0, 0.5, true);
    auto loss = [&] {
        BatchNormStats stats;  // fresh each pass: stats update is out-of-graph
        Tensor y = batch_norm(x, gamma, beta, 1e-5, BnMode::train, stats, 0.1);
        return mean_all(mul(y, shift(y, 1.0)));
    };
    for (Tensor t : {x, gamma, beta}) {
        auto analytic = grad_of(loss, t);
        auto numeric = fd_grad(t, [&] { return loss().scalar_value(); });
        CHECK(max_rel_err(analytic, numeric) < 1e-3);
    }
}

TEST_CASE("NoGradGuard suppresses graph recording") {
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    {
        NoGradGuard guard;
        CHECK_FALSE(grad_recording());
        Tensor y = mul(x, x);
        CHECK_FALSE(y.tracked());
        CHECK(y.inputs().empty());
    }
    CHECK(grad_recording());
    CHECK(mul(x, x).tracked());
    CHECK(x.detach().tracked() == false);
}

TEST_CASE("tape is creation-ordered and replay is deterministic") {
    auto build = [] {
        Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
        Tensor y = mul(add(x, x), x);
        return sum_all(y);
    };
    Tensor loss = build();
    Tape tape = Tape::of(loss);
    CHECK(tape.nodes.size() == 4);  // x, add, mul, sum
    for (std::size_t i = 1; i < tape.nodes.size(); ++i)
        CHECK(tape.nodes[i - 1].node_id() < tape.nodes[i].node_id());
    // Every node's inputs appear earlier in the tape.
    for (const auto& n : tape.nodes)
        for (const auto& in : n.inputs())
            if (in.tracked()) CHECK(in.node_id() < n.node_id());

    // Same program, bit-identical values and gradients on replay.
    Tensor a = build(), b = build();
    CHECK(a.values() == b.values());
    backward(a);
    backward(b);
    CHECK(Tape::of(a).nodes[0].grad() == Tape::of(b).nodes[0].grad());
}

TEST_CASE("gradient() returns values and supports unrelated wrt") {
    Tensor x = Tensor::from_values({3}, {1.0, 2.0, 3.0}, true);
    Tensor unrelated = Tensor::from_values({2}, {1.0, 1.0}, true);
    Tensor g = gradient(sum_all(mul(x, x)), x, false);
    CHECK(g.values() == std::vector<double>{2, 4, 6});
    CHECK_FALSE(x.has_grad());  // gradient() must not touch accumulators
    CHECK(gradient(sum_all(x), unrelated, false).values() == std::vector<double>{0, 0});
    CHECK_THROWS_AS(gradient(sum_all(x), Tensor::scalar(1.0), false), ConfigError);
}

TEST_CASE("gradient(create_graph) supports differentiating a gradient") {
    // s = sum((dx sum(x^2))^2) = sum(4 x^2), so ds/dx = 8x.
    Tensor x = Tensor::from_values({3}, {1.0, -2.0, 0.5}, true);
    Tensor g = gradient(sum_all(mul(x, x)), x, true);
    CHECK(g.tracked());
    backward(sum_all(mul(g, g)));
    CHECK(x.grad()[0] == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(x.grad()[1] == doctest::Approx(-16.0).epsilon(1e-12));
    CHECK(x.grad()[2] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("second derivatives flow through the conv family") {
    // Differentiate the squared norm of an input gradient w.r.t. the kernel
    // and check against finite differences of that (first-order) quantity.
    Rng rng(53);
    Tensor x = Tensor::randn({1, 1, 4, 4}, rng);
    Tensor k = Tensor::randn({2, 1, 3, 3}, rng, 0.0, 1.0, true);

    auto first_order = [&]() -> Tensor {
        Tensor xv = Tensor::from_values(x.shape(), x.values(), true);
        Tensor y = conv2d(xv, k, {1, 1}, {1, 1});
        Tensor gx = gradient(sum_all(mul(y, y)), xv, true);
        return sum_all(mul(gx, gx));
    };
    k.zero_grad();
    backward(first_order());
    auto analytic = k.grad();
    auto numeric = fd_grad(k, [&] { return first_order().scalar_value(); });
    CHECK(max_rel_err(analytic, numeric) < 1e-3);
}

TEST_CASE("input_gradient_norm of a linear scorer is the weight norm") {
    // net(x) = x . w + b has d(net)/dx = w for every sample.
    Tensor w = Tensor::from_values({2, 1}, {3.0, 4.0}, true);
    Tensor b = Tensor::from_values({1}, {0.7}, true);
    Rng rng(59);
    Tensor x = Tensor::randn({5, 2}, rng);
    Tensor norms = input_gradient_norm(
        [&](const Tensor& xv) { return fully_connected(xv, w, b); }, x);
    CHECK(norms.shape() == Shape{5});
    for (double n : norms.values()) CHECK(n == doctest::Approx(5.0).epsilon(1e-9));

    // Constant net: gradient is zero, norm collapses to sqrt(eps).
    Tensor c = Tensor::scalar(2.0);
    Tensor zn = input_gradient_norm(
        [&](const Tensor& xv) {
            return broadcast_to(c, {xv.dim(0)});
        },
        x);
    for (double n : zn.values()) CHECK(n <= 1e-5);
}

TEST_CASE("input_gradient_norm is differentiable w.r.t. the scorer parameters") {
    Rng rng(61);
    Tensor w1 = Tensor::randn({3, 4}, rng, 0.0, 0.7, true);
    Tensor b1 = Tensor::randn({4}, rng, 0.0, 0.3, true);
    Tensor w2 = Tensor::randn({4, 1}, rng, 0.0, 0.7, true);
    Tensor b2 = Tensor::randn({1}, rng, 0.0, 0.3, true);
    Tensor x = Tensor::randn({4, 3}, rng);

    auto scorer = [&](const Tensor& xv) {
        return reshape(fully_connected(leaky_relu(fully_connected(xv, w1, b1), 0.2), w2, b2),
                       {xv.dim(0)});
    };
    auto penalty = [&]() -> Tensor {
        Tensor norms = input_gradient_norm(scorer, x);
        Tensor excess = shift(norms, -1.0);
        return scale(mean_all(mul(excess, excess)), 10.0);
    };
    // The input gradient of this scorer is w1 . mask . w2: it depends on the
    // weights (checked against finite differences) but on the biases only
    // through measure-zero activation sign flips, so they get no gradient.
    for (Tensor t : {w1, w2}) {
        t.zero_grad();
        backward(penalty());
        auto analytic = t.grad();
        auto numeric = fd_grad(t, [&] { return penalty().scalar_value(); });
        CHECK(max_rel_err(analytic, numeric) < 1e-3);
    }
    backward(penalty());
    CHECK_FALSE(b2.has_grad());
}

TEST_CASE("full generator-discriminator stack gradient matches finite differences") {
    // Miniature end-to-end stack: noise -> fc -> deconv -> scorer convs -> fc.
    Rng rng(67);
    const std::int64_t B = 2;
    LinearLayer gfc(5, 3 * 2 * 4, rng);
    ConvT2dLayer gdeconv(3, 1, {3, 3}, {2, 2}, {1, 1}, 3, 7, rng);
    Conv2dLayer dconv(1, 2, {3, 3}, {2, 2}, {1, 1}, rng);
    LinearLayer dfc(2 * 2 * 4, 1, rng);
    // Re-draw all parameters at a healthy magnitude: with tiny deployment-
    // style init the pre-activations sit so close to the leaky_relu kinks
    // that a 1e-5 finite-difference step crosses them and measures a secant.
    for (Tensor t : {gfc.w, gfc.b, gdeconv.k, gdeconv.b, dconv.k, dconv.b, dfc.w, dfc.b})
        for (auto& v : t.mutable_values()) v = rng.normal(0.0, 0.6);
    Tensor z = Tensor::randn({B, 5}, rng);

    auto forward = [&]() -> Tensor {
        Tensor h = leaky_relu(gfc.forward(z), 0.2);
        Tensor img = gdeconv.forward(reshape(h, {B, 3, 2, 4}));
        Tensor d1 = leaky_relu(dconv.forward(img), 0.2);
        Tensor s = dfc.forward(reshape(d1, {B, 2 * 2 * 4}));
        return mean_all(s);
    };
    std::vector<NamedParam> params;
    gfc.append_params("g.fc", params);
    gdeconv.append_params("g.deconv", params);
    dconv.append_params("d.conv", params);
    dfc.append_params("d.fc", params);
    for (auto& [name, t] : params) {
        CAPTURE(name);
        t.zero_grad();
        backward(forward());
        auto analytic = t.grad();
        auto numeric = fd_grad(t, [&] { return forward().scalar_value(); });
        CHECK(max_rel_err(analytic, numeric) < 1e-4);
    }
}
