#include <cmath>
#include <random>

#include "deadnet/gradcheck.hpp"
#include "deadnet/ops.hpp"
#include "doctest.h"

using namespace deadnet;

namespace {

Tensor64 random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor64 t(std::move(shape));
    for (auto& v : t.data()) v = u(rng);
    return t;
}

double dot(const Tensor64& a, const Tensor64& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("conv2d output extents and simple values") {
    SUBCASE("Conv1_1 geometry") {
        Tensor in({1, 220, 220, 1}, 0.5f);
        Tensor k({16, 9, 9, 1}, 0.01f);
        CHECK(conv2d(in, k, 1, 0).shape() == Shape{1, 212, 212, 16});
    }
    SUBCASE("1x1 identity") {
        Tensor in({1, 1, 1, 1}, 3.25f);
        Tensor k({1, 1, 1, 1}, 1.0f);
        CHECK(conv2d(in, k, 1, 0)[0] == 3.25f);
    }
    SUBCASE("constant sum") {
        Tensor in({1, 3, 3, 1}, 1.0f);
        Tensor k({1, 2, 2, 1}, 1.0f);
        auto out = conv2d(in, k, 1, 0);
        CHECK(out.shape() == Shape{1, 2, 2, 1});
        for (float v : out.data()) CHECK(v == 4.0f);
    }
    SUBCASE("zero input gives zero output") {
        auto k = random_tensor({4, 3, 3, 2}, 7);
        Tensor64 in({2, 6, 6, 2}, 0.0);
        const auto out = conv2d(in, k, 1, 1);
        for (double v : out.data()) CHECK(v == 0.0);
    }
    SUBCASE("errors") {
        Tensor in({1, 4, 4, 2});
        CHECK_THROWS_AS(conv2d(in, Tensor({1, 3, 3, 1}), 1, 0), ShapeError);
        CHECK_THROWS_AS(conv2d(in, Tensor({1, 5, 5, 2}), 1, 0), ShapeError);
    }
}

TEST_CASE("maxpool forward") {
    Tensor in({1, 2, 2, 1}, std::vector<float>{1, 2, 3, 4});
    auto out = maxpool(in, 2, 2);
    CHECK(out.shape() == Shape{1, 1, 1, 1});
    CHECK(out[0] == 4.0f);

    CHECK(maxpool(Tensor({1, 212, 212, 16}), 2, 2).shape() == Shape{1, 106, 106, 16});
    auto c = maxpool(Tensor({1, 6, 6, 3}, 2.5f), 2, 2);
    CHECK(c.shape() == Shape{1, 3, 3, 3});
    for (float v : c.data()) CHECK(v == 2.5f);

    auto r = random_tensor({2, 9, 9, 3}, 11);
    const double in_max = *std::max_element(r.data().begin(), r.data().end());
    auto p = maxpool(r, 2, 2);
    CHECK(*std::max_element(p.data().begin(), p.data().end()) <= in_max);

    CHECK_THROWS_AS(maxpool(Tensor({1, 2, 2, 1}), 3, 1), ShapeError);
}

TEST_CASE("maxpool gradient goes to the first maximum on ties") {
    Tensor64 in({1, 2, 2, 1}, 1.0);
    Tensor64 g({1, 1, 1, 1}, 5.0);
    auto gi = maxpool_backward(in, g, 2, 2);
    CHECK(gi[0] == 5.0);
    CHECK(gi[1] == 0.0);
    CHECK(gi[2] == 0.0);
    CHECK(gi[3] == 0.0);
}

TEST_CASE("batchnorm standardizes and applies affine") {
    Tensor64 in({2, 1}, std::vector<double>{3, 7});
    auto state = BatchNormState<double>::fresh(1);
    OpContext train{true, 0};
    auto out = batchnorm(in, Tensor64({1}, 1.0), Tensor64({1}, 0.0), state, train);
    CHECK(out[0] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(out[1] == doctest::Approx(1.0).epsilon(1e-5));

    auto state2 = BatchNormState<double>::fresh(1);
    auto aff = batchnorm(in, Tensor64({1}, 2.0), Tensor64({1}, 1.0), state2, train);
    CHECK(aff[0] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(aff[1] == doctest::Approx(3.0).epsilon(1e-5));

    auto state3 = BatchNormState<double>::fresh(1);
    CHECK_THROWS_AS(batchnorm(Tensor64({1, 1}, 1.0), Tensor64({1}, 1.0), Tensor64({1}, 0.0), state3, train),
                    ShapeError);
}

TEST_CASE("batchnorm running statistics converge (Monte-Carlo)") {
    // data ~ N(3, 2^2) per channel; after training, inference output should be ~N(0, 1)
    std::mt19937_64 rng(5);
    std::normal_distribution<double> dist(3.0, 2.0);
    auto state = BatchNormState<float>::fresh(2);
    Tensor scale({2}, 1.0f), shift({2}, 0.0f);
    for (int b = 0; b < 1000; ++b) {
        Tensor batch({200, 2});
        for (auto& v : batch.data()) v = static_cast<float>(dist(rng));
        batchnorm(batch, scale, shift, state, OpContext{true, 0});
    }
    Tensor fresh({5000, 2});
    for (auto& v : fresh.data()) v = static_cast<float>(dist(rng));
    auto out = batchnorm(fresh, scale, shift, state, OpContext{false, 0});
    double mean = 0;
    for (float v : out.data()) mean += v;
    mean /= static_cast<double>(out.size());
    CHECK(std::abs(mean) < 0.05);
}

TEST_CASE("relu") {
    Tensor in({3}, std::vector<float>{-1, 0, 2});
    CHECK(relu(in).values() == std::vector<float>{0, 0, 2});
    Tensor pos({3}, std::vector<float>{0.5f, 1, 2});
    CHECK(relu(pos) == pos);
}

TEST_CASE("dropout") {
    Tensor in({1000}, 2.0f);
    CHECK(dropout(in, 0.5, OpContext{false, 1}).output == in);
    CHECK(dropout(in, 0.0, OpContext{true, 1}).output == in);
    CHECK_THROWS_AS(dropout(in, 1.0, OpContext{true, 1}), Error);

    SUBCASE("inverted dropout preserves expectation") {
        Tensor big({1000000}, 1.0f);
        auto d = dropout(big, 0.5, OpContext{true, 99});
        double mean = 0;
        for (float v : d.output.data()) mean += v;
        mean /= 1e6;
        CHECK(std::abs(mean - 1.0) < 0.01);
    }
    SUBCASE("deterministic per seed") {
        CHECK(dropout(in, 0.5, OpContext{true, 3}).output == dropout(in, 0.5, OpContext{true, 3}).output);
        CHECK(!(dropout(in, 0.5, OpContext{true, 3}).output == dropout(in, 0.5, OpContext{true, 4}).output));
    }
}

TEST_CASE("fc") {
    Tensor x({1, 3}, std::vector<float>{1, -2, 3});
    Tensor eye({3, 3}, std::vector<float>{1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor zero_bias({3});
    CHECK(fc(x, eye, &zero_bias).values() == x.values());
    Tensor b({3}, std::vector<float>{4, 5, 6});
    CHECK(fc(x, Tensor({3, 3}), &b).values() == b.values());
    CHECK(fc(Tensor({1, 13, 13, 128}), Tensor({512, 13 * 13 * 128}), nullptr).shape() == Shape{1, 512});
    CHECK_THROWS_AS(fc(x, Tensor({3, 4}), nullptr), ShapeError);
}

TEST_CASE("softmax cross-entropy") {
    auto r = softmax_xent(Tensor64({2}, std::vector<double>{0, 0}), 0);
    CHECK(r.probs[0] == doctest::Approx(0.5));
    CHECK(r.loss == doctest::Approx(std::log(2.0)));

    auto s = softmax_xent(Tensor64({2}, std::vector<double>{123.5, 123.5}), 1);
    CHECK(s.probs[0] == doctest::Approx(0.5));

    auto t = softmax_xent(Tensor64({2}, std::vector<double>{10, -10}), 0);
    CHECK(t.loss == doctest::Approx(2.0611536942919273e-9).epsilon(1e-6));

    CHECK_THROWS_AS(softmax_xent(Tensor64({2}), 2), Error);

    SUBCASE("sums to one and is shift invariant") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            auto z = random_tensor({5}, seed, -40, 40);
            auto p = softmax(z);
            double total = 0;
            for (double v : p.data()) total += v;
            CHECK(std::abs(total - 1.0) < 1e-6);
            auto shifted = z;
            for (auto& v : shifted.data()) v += 17.0;
            auto q = softmax(shifted);
            for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-6);
        }
    }
}

// ---- finite-difference checks --------------------------------------------
// Each op is reduced to a scalar with a fixed random projection so the
// analytic VJP of that projection can be compared against central differences.

TEST_CASE("gradient check: conv2d") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto x = random_tensor({1, 8, 8, 2}, seed);
        auto k = random_tensor({3, 3, 3, 2}, seed + 100);
        const std::size_t stride = 1 + seed % 2, pad = seed % 2;
        auto y = conv2d(x, k, stride, pad);
        auto proj = random_tensor(y.shape(), seed + 200);
        auto g = conv2d_backward(x, k, proj, stride, pad);
        auto loss = [&] { return dot(conv2d(x, k, stride, pad), proj); };
        auto rx = gradient_check(loss, x, g.input, 100, seed);
        auto rk = gradient_check(loss, k, g.kernels, 100, seed);
        CHECK(rx.passed(kTol));
        CHECK(rk.passed(kTol));
        CHECK(rx.coordinates == 100);
    }
}

TEST_CASE("gradient check: maxpool, relu, fc, dropout") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        {
            auto x = random_tensor({2, 6, 6, 3}, seed);
            auto proj = random_tensor({2, 3, 3, 3}, seed + 1);
            auto g = maxpool_backward(x, proj, 2, 2);
            CHECK(gradient_check([&] { return dot(maxpool(x, 2, 2), proj); }, x, g, 100, seed).passed(kTol));
        }
        {
            auto x = random_tensor({50}, seed);
            auto proj = random_tensor({50}, seed + 1);
            auto g = relu_backward(x, proj);
            CHECK(gradient_check([&] { return dot(relu(x), proj); }, x, g, 100, seed).passed(kTol));
            // derivative is exactly 0 below zero and 1 above
            for (std::size_t i = 0; i < x.size(); ++i) CHECK(g[i] == (x[i] > 0 ? proj[i] : 0.0));
        }
        {
            auto x = random_tensor({3, 2, 2, 5}, seed);
            auto w = random_tensor({4, 20}, seed + 1);
            auto b = random_tensor({4}, seed + 2);
            auto proj = random_tensor({3, 4}, seed + 3);
            auto g = fc_backward(x, w, proj, true);
            auto loss = [&] { return dot(fc(x, w, &b), proj); };
            CHECK(gradient_check(loss, x, g.input, 100, seed).passed(kTol));
            CHECK(gradient_check(loss, w, g.weights, 100, seed).passed(kTol));
            CHECK(gradient_check(loss, b, g.bias, 100, seed).passed(kTol));
        }
        {
            auto x = random_tensor({40}, seed);
            auto proj = random_tensor({40}, seed + 1);
            const OpContext ctx{true, seed};
            auto mask = dropout(x, 0.5, ctx).mask;
            auto g = dropout_backward(proj, mask);
            CHECK(gradient_check([&] { return dot(dropout(x, 0.5, ctx).output, proj); }, x, g, 100, seed)
                      .passed(kTol));
        }
    }
}

TEST_CASE("gradient check: batchnorm in training mode, batch 4") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto x = random_tensor({4, 3, 3, 2}, seed);
        auto scale = random_tensor({2}, seed + 1, 0.5, 1.5);
        auto shift = random_tensor({2}, seed + 2);
        auto proj = random_tensor(x.shape(), seed + 3);
        const OpContext ctx{true, 0};
        auto run = [&] {
            auto st = BatchNormState<double>::fresh(2);
            return batchnorm(x, scale, shift, st, ctx);
        };
        auto st = BatchNormState<double>::fresh(2);
        BatchNormCache<double> cache;
        batchnorm(x, scale, shift, st, ctx, &cache);
        auto g = batchnorm_backward(proj, scale, cache);
        auto loss = [&] { return dot(run(), proj); };
        CHECK(gradient_check(loss, x, g.input, 100, seed).passed(kTol));
        CHECK(gradient_check(loss, scale, g.scale, 100, seed).passed(kTol));
        CHECK(gradient_check(loss, shift, g.shift, 100, seed).passed(kTol));
    }
}

TEST_CASE("gradient check: batchnorm inference mode and softmax cross-entropy") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto x = random_tensor({3, 4}, seed);
        auto scale = random_tensor({4}, seed + 1, 0.5, 1.5);
        auto shift = random_tensor({4}, seed + 2);
        auto st = BatchNormState<double>{random_tensor({4}, seed + 4), random_tensor({4}, seed + 5, 0.5, 2)};
        auto proj = random_tensor(x.shape(), seed + 3);
        BatchNormCache<double> cache;
        batchnorm(x, scale, shift, st, OpContext{false, 0}, &cache);
        auto g = batchnorm_backward(proj, scale, cache);
        auto loss = [&] { return dot(batchnorm(x, scale, shift, st, OpContext{false, 0}), proj); };
        CHECK(gradient_check(loss, x, g.input, 100, seed).passed(kTol));

        auto logits = random_tensor({6, 3}, seed + 9, -3, 3);
        std::vector<int> labels{0, 1, 2, 1, 0, 2};
        auto sx = softmax_xent(logits, labels);
        CHECK(gradient_check([&] { return softmax_xent(logits, labels).loss; }, logits, sx.grad_logits, 100, seed)
                  .passed(kTol));
    }
}

TEST_CASE("gradient_check reports relative error with floor") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(0.0, 1e-9) == doctest::Approx(0.1));
    CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("piecewise gradient check steps around kinks") {
    // relu(x - 0.3) with x sitting 4e-6 above the kink: a 1e-5 step straddles it
    Tensor64 x({2}, std::vector<double>{0.3 + 4e-6, 0.7});
    auto loss = [&] { return std::max(x[0] - 0.3, 0.0) + 1e-3 * x[1] * x[1]; };
    const Tensor64 g({2}, std::vector<double>{1.0, 2e-3 * 0.7});
    CHECK_FALSE(gradient_check(loss, x, g, 2, 0, 1e-5).passed(kTol));
    const auto r = gradient_check_piecewise(loss, x, g, 2, 0, {1e-5, 1e-6, 1e-7});
    CHECK(r.coordinates == 2);
    CHECK(r.passed(kTol));
    CHECK(x[0] == 0.3 + 4e-6);
}
