#include "doctest.h"

#include <cmath>
#include <vector>

#include "affcorr/nn.hpp"

using namespace affcorr;

namespace {

Matrix<double> single_row(const std::vector<double> &v) {
    Matrix<double> m(1, v.size());
    std::copy(v.begin(), v.end(), m.data.begin());
    return m;
}

// Analytic gradients of the batch cross-entropy of a stack, then the
// finite-difference comparison over every parameter.
double stack_fd_worst(DenseStack<double> &stack, const Matrix<double> &x,
                      const std::vector<int> &labels, const GradCheckConfig &cfg = {}) {
    StackActivations<double> cache;
    stack.forward_train(x, 0.0, nullptr, cache);
    Matrix<double> dlogits, dx;
    softmax_ce_batch(cache.acts.back(), labels, dlogits);
    DenseStack<double> grads = stack.zeros_like();
    stack.backward(cache, dlogits, grads, dx);

    std::vector<std::span<double>> params;
    stack.collect_params(params);
    std::vector<std::span<double>> gviews;
    grads.collect_params(gviews);
    std::vector<std::vector<double>> analytic;
    for (const auto &g : gviews) {
        analytic.emplace_back(g.begin(), g.end());
    }

    return finite_difference_check(
        params, analytic,
        [&] {
            Matrix<double> y;
            stack.forward(x, y);
            Matrix<double> unused;
            return softmax_ce_batch(y, labels, unused);
        },
        cfg);
}

} // namespace

TEST_CASE("dense layer with identity weights passes input through") {
    DenseLayer<double> layer(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        layer.w.at(i, i) = 1.0;
    }
    Matrix<double> y;
    layer.forward(single_row({0.5, -1.0, 2.0}), y);
    CHECK(y.data == std::vector<double>{0.5, -1.0, 2.0});
}

TEST_CASE("dense layer matches hand arithmetic") {
    // Logical map [[1,2],[3,4]]x + [1,1]; stored input-major.
    DenseLayer<double> layer(2, 2);
    layer.w.at(0, 0) = 1.0;
    layer.w.at(0, 1) = 3.0;
    layer.w.at(1, 0) = 2.0;
    layer.w.at(1, 1) = 4.0;
    layer.b = {1.0, 1.0};
    Matrix<double> y;
    layer.forward(single_row({1.0, 1.0}), y);
    CHECK(y.data == std::vector<double>{4.0, 8.0});
}

TEST_CASE("dense layer matches a naive double-loop product") {
    Rng rng(101);
    DenseLayer<double> layer(17, 9);
    for (auto &w : layer.w.data) {
        w = rng.normal();
    }
    for (auto &b : layer.b) {
        b = rng.normal();
    }
    Matrix<double> x(4, 17);
    for (auto &v : x.data) {
        v = rng.normal();
    }
    Matrix<double> y;
    layer.forward(x, y);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t j = 0; j < 9; ++j) {
            double ref = layer.b[j];
            for (std::size_t i = 0; i < 17; ++i) {
                ref += x.at(r, i) * layer.w.at(i, j);
            }
            CHECK(y.at(r, j) == doctest::Approx(ref).epsilon(1e-12));
        }
    }
}

TEST_CASE("dense layer rejects mismatched input width") {
    DenseLayer<double> layer(3, 2);
    Matrix<double> y;
    CHECK_THROWS_AS(layer.forward(single_row({1.0, 2.0}), y), ShapeError);
}

TEST_CASE("stack construction validates dimensions") {
    CHECK_THROWS_AS(DenseStack<double>({5}, true), InvalidInput);
    CHECK_THROWS_AS(DenseStack<double>({5, 0, 3}, true), InvalidInput);
    const DenseStack<double> stack({5, 7, 3}, true);
    CHECK(stack.in_dim() == 5);
    CHECK(stack.out_dim() == 3);
    CHECK(stack.dims() == std::vector<std::size_t>{5, 7, 3});
}

TEST_CASE("relu_after_last controls the output nonlinearity") {
    DenseStack<double> relu_stack({2, 2}, true);
    DenseStack<double> linear_stack({2, 2}, false);
    relu_stack.layers()[0].b = {-1.0, 2.0};
    linear_stack.layers()[0].b = {-1.0, 2.0};

    const auto relu_out = relu_stack.forward(std::vector<double>{0.0, 0.0});
    const auto lin_out = linear_stack.forward(std::vector<double>{0.0, 0.0});
    CHECK(relu_out == std::vector<double>{0.0, 2.0});
    CHECK(lin_out == std::vector<double>{-1.0, 2.0});
}

TEST_CASE("training forward without dropout equals inference") {
    Rng rng(7);
    DenseStack<double> stack({6, 5, 4}, false);
    stack.init_he(rng);
    Matrix<double> x(3, 6);
    for (auto &v : x.data) {
        v = rng.normal();
    }
    StackActivations<double> cache;
    stack.forward_train(x, 0.0, nullptr, cache);
    Matrix<double> y;
    stack.forward(x, y);
    CHECK(cache.acts.back().data == y.data);
}

TEST_CASE("single linear layer reproduces the closed-form squared-error gradient") {
    DenseStack<double> stack({3, 1}, false);
    auto &layer = stack.layers()[0];
    layer.w.data = {0.5, -0.25, 2.0};
    layer.b = {0.75};
    const std::vector<double> x = {1.0, 2.0, -1.0};
    const double target = 0.3;

    StackActivations<double> cache;
    stack.forward_train(single_row(x), 0.0, nullptr, cache);
    const double y = cache.acts.back().data[0];

    // loss = (y - t)^2, so dL/dy = 2(y - t).
    Matrix<double> dy(1, 1);
    dy.data[0] = 2.0 * (y - target);
    DenseStack<double> grads = stack.zeros_like();
    Matrix<double> dx;
    stack.backward(cache, dy, grads, dx);

    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(grads.layers()[0].w.data[i] == doctest::Approx(2.0 * (y - target) * x[i]));
        CHECK(dx.data[i] == doctest::Approx(2.0 * (y - target) * layer.w.data[i]));
    }
    CHECK(grads.layers()[0].b[0] == doctest::Approx(2.0 * (y - target)));
}

TEST_CASE("zero output gradient produces zero parameter gradients") {
    Rng rng(8);
    DenseStack<double> stack({4, 4, 2}, false);
    stack.init_he(rng);
    Matrix<double> x(2, 4);
    for (auto &v : x.data) {
        v = rng.normal();
    }
    StackActivations<double> cache;
    stack.forward_train(x, 0.0, nullptr, cache);
    DenseStack<double> grads = stack.zeros_like();
    Matrix<double> dx;
    stack.backward(cache, Matrix<double>(2, 2), grads, dx);
    for (const auto &l : grads.layers()) {
        for (double g : l.w.data) {
            CHECK(g == 0.0);
        }
        for (double g : l.b) {
            CHECK(g == 0.0);
        }
    }
}

TEST_CASE("backward without a forward pass is rejected") {
    DenseStack<double> stack({3, 2}, false);
    StackActivations<double> cache;
    DenseStack<double> grads = stack.zeros_like();
    Matrix<double> dx;
    CHECK_THROWS_AS(stack.backward(cache, Matrix<double>(1, 2), grads, dx), StateError);
}

TEST_CASE("three-layer relu net passes the finite-difference check") {
    Rng rng(9);
    DenseStack<double> stack({5, 7, 6, 3}, false);
    stack.init_he(rng);
    Matrix<double> x(4, 5);
    for (auto &v : x.data) {
        v = rng.normal();
    }
    CHECK(stack_fd_worst(stack, x, {0, 2, 1, 0}) < 1e-4);
}

TEST_CASE("a linear network passes the finite-difference check tightly") {
    Rng rng(10);
    DenseStack<double> stack({6, 3}, false);
    stack.init_he(rng);
    Matrix<double> x(3, 6);
    for (auto &v : x.data) {
        v = rng.normal();
    }
    CHECK(stack_fd_worst(stack, x, {0, 1, 2}) < 1e-9);
}

TEST_CASE("dead relu units carry exactly zero gradient on both sides") {
    DenseStack<double> stack({2, 2, 2}, false);
    auto &first = stack.layers()[0];
    first.w.data = {0.1, 0.2, 0.3, 0.4};
    first.b = {-100.0, -100.0}; // both hidden units always off
    auto &second = stack.layers()[1];
    second.w.data = {1.0, -1.0, 0.5, 0.5};

    Matrix<double> x(2, 2);
    x.data = {1.0, -2.0, 0.5, 0.25};
    StackActivations<double> cache;
    stack.forward_train(x, 0.0, nullptr, cache);
    Matrix<double> dlogits, dx;
    softmax_ce_batch(cache.acts.back(), std::vector<int>{0, 1}, dlogits);
    DenseStack<double> grads = stack.zeros_like();
    stack.backward(cache, dlogits, grads, dx);

    for (double g : grads.layers()[0].w.data) {
        CHECK(g == 0.0);
    }
    // Finite differences agree: the loss is flat in the first layer's weights.
    std::vector<std::span<double>> params;
    stack.collect_params(params);
    const double h = 1e-5;
    double &probe = stack.layers()[0].w.data[0];
    const auto loss = [&] {
        Matrix<double> y, unused;
        stack.forward(x, y);
        return softmax_ce_batch(y, std::vector<int>{0, 1}, unused);
    };
    const double saved = probe;
    probe = saved + h;
    const double up = loss();
    probe = saved - h;
    const double down = loss();
    probe = saved;
    CHECK(up == down);
}

TEST_CASE("softmax cross-entropy on equal logits") {
    const auto res = softmax_cross_entropy<double>(std::vector<double>{0.0, 0.0}, 0);
    CHECK(res.loss == doctest::Approx(std::log(2.0)));
    CHECK(res.grad[0] == doctest::Approx(-0.5));
    CHECK(res.grad[1] == doctest::Approx(0.5));
    CHECK(res.probs[0] + res.probs[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("softmax cross-entropy survives huge logits") {
    const auto res = softmax_cross_entropy<double>(std::vector<double>{1000.0, 0.0}, 0);
    CHECK(std::isfinite(res.loss));
    CHECK(res.loss == doctest::Approx(0.0));
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
    Rng rng(11);
    std::vector<double> logits(5);
    for (auto &v : logits) {
        v = rng.normal();
    }
    const auto res = softmax_cross_entropy<double>(logits, 3);
    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        auto up = logits, down = logits;
        up[i] += h;
        down[i] -= h;
        const double num = (softmax_cross_entropy<double>(up, 3).loss -
                            softmax_cross_entropy<double>(down, 3).loss) /
                           (2.0 * h);
        CHECK(res.grad[i] == doctest::Approx(num).epsilon(1e-6));
    }
}

TEST_CASE("softmax cross-entropy rejects bad class indices") {
    CHECK_THROWS_AS(softmax_cross_entropy<double>(std::vector<double>{0.0, 0.0}, 2),
                    InvalidInput);
}

TEST_CASE("adam first step matches the hand-evaluated update") {
    std::vector<double> theta = {1.0};
    std::vector<double> grad = {1.0};
    AdamState<double> adam;
    adam.lr = 1e-4;
    adam.attach({std::span<double>(theta)});
    adam.step({std::span<double>(theta)}, {std::span<const double>(grad)});
    // m_hat = 1, v_hat = 1 after bias correction, so the step is lr/(1+eps).
    CHECK(theta[0] == doctest::Approx(1.0 - 1e-4 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(adam.step_count() == 1);
}

TEST_CASE("adam leaves parameters alone for zero gradients or zero lr") {
    std::vector<double> theta = {0.5, -0.5};
    std::vector<double> zero = {0.0, 0.0};
    AdamState<double> adam;
    adam.attach({std::span<double>(theta)});
    adam.step({std::span<double>(theta)}, {std::span<const double>(zero)});
    CHECK(theta == std::vector<double>{0.5, -0.5});

    std::vector<double> grad = {1.0, -2.0};
    AdamState<double> frozen;
    frozen.lr = 0.0;
    frozen.attach({std::span<double>(theta)});
    frozen.step({std::span<double>(theta)}, {std::span<const double>(grad)});
    CHECK(theta == std::vector<double>{0.5, -0.5});
}

TEST_CASE("two adam steps match a literal transcription of the update rules") {
    std::vector<double> theta = {0.2};
    const double g = 0.7, lr = 1e-3;
    AdamState<double> adam;
    adam.lr = lr;
    adam.attach({std::span<double>(theta)});
    std::vector<double> grad = {g};
    adam.step({std::span<double>(theta)}, {std::span<const double>(grad)});
    adam.step({std::span<double>(theta)}, {std::span<const double>(grad)});

    double ref = 0.2, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        ref -= lr * mhat / (std::sqrt(vhat) + 1e-8);
    }
    CHECK(theta[0] == doctest::Approx(ref).epsilon(1e-15));
}

TEST_CASE("full-batch adam on a convex problem never increases the loss") {
    Rng rng(12);
    DenseStack<double> stack({4, 3}, false);
    stack.init_he(rng);
    Matrix<double> x(8, 4);
    for (auto &v : x.data) {
        v = rng.normal();
    }
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) {
        labels.push_back(i % 3);
    }

    std::vector<std::span<double>> params;
    stack.collect_params(params);
    AdamState<double> adam;
    adam.attach(params);

    double prev = 1e300;
    for (int step = 0; step < 100; ++step) {
        StackActivations<double> cache;
        stack.forward_train(x, 0.0, nullptr, cache);
        Matrix<double> dlogits, dx;
        const double loss = softmax_ce_batch(cache.acts.back(), labels, dlogits);
        CHECK(loss <= prev);
        prev = loss;
        DenseStack<double> grads = stack.zeros_like();
        stack.backward(cache, dlogits, grads, dx);
        std::vector<std::span<double>> gv;
        grads.collect_params(gv);
        std::vector<std::span<const double>> cgv(gv.begin(), gv.end());
        adam.step(params, cgv);
    }
}

TEST_CASE("dropout in inference mode and at p=0 is the identity") {
    Rng rng(13);
    std::vector<double> x = {1.0, -2.0, 3.0};
    const auto x0 = x;
    auto mask = dropout_apply<double>(x, 0.4, false, rng);
    CHECK(x == x0);
    CHECK(mask == std::vector<std::uint8_t>(3, 1));
    mask = dropout_apply<double>(x, 0.0, true, rng);
    CHECK(x == x0);
    CHECK(mask == std::vector<std::uint8_t>(3, 1));
}

TEST_CASE("dropout keeps roughly 1-p units and rescales them") {
    Rng rng(14);
    const std::size_t n = 1000000;
    std::vector<double> x(n, 1.0);
    const auto mask = dropout_apply<double>(x, 0.4, true, rng);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask[i]) {
            ++kept;
            CHECK(x[i] == doctest::Approx(1.0 / 0.6));
        } else {
            CHECK(x[i] == 0.0);
        }
    }
    const double frac = static_cast<double>(kept) / n;
    CHECK(std::abs(frac - 0.6) < 0.002);
}

TEST_CASE("dropout rejects probabilities outside [0,1)") {
    Rng rng(15);
    std::vector<double> x = {1.0};
    CHECK_THROWS_AS(dropout_apply<double>(x, 1.0, true, rng), InvalidInput);
    CHECK_THROWS_AS(dropout_apply<double>(x, -0.1, true, rng), InvalidInput);
}

TEST_CASE("stack dropout masks are deterministic under a seed") {
    DenseStack<float> stack({8, 8, 8}, true);
    Rng init(16);
    stack.init_he(init);
    Matrix<float> x(4, 8);
    Rng data(17);
    for (auto &v : x.data) {
        v = static_cast<float>(data.normal());
    }
    StackActivations<float> a, b;
    Rng ra(99), rb(99);
    stack.forward_train(x, 0.4, &ra, a);
    stack.forward_train(x, 0.4, &rb, b);
    CHECK(a.acts.back().data == b.acts.back().data);
    CHECK(a.back_scale[0].data == b.back_scale[0].data);
}
