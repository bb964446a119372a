#include <filesystem>
#include <fstream>
#include <random>

#include "deadnet/gradcheck.hpp"
#include "deadnet/model.hpp"
#include "doctest.h"

using namespace deadnet;

namespace {

Tensor random_image(const Extent& e, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n(0.0f, 1.0f);
    Tensor t({e.height, e.width, e.channels});
    for (auto& v : t.data()) v = n(rng);
    return t;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("deadnet_test_" + name);
}

}  // namespace

TEST_CASE("default spec chains the published layer table") {
    const auto shapes = NetworkSpec::deadnet().shapes();
    REQUIRE(shapes.size() == 15);
    struct Row {
        const char* name;
        Extent in, out;
    };
    const Row table[] = {
        {"conv1_1", {220, 220, 1}, {212, 212, 16}},  {"conv1_2", {212, 212, 16}, {212, 212, 16}},
        {"maxpool_1", {212, 212, 16}, {106, 106, 16}}, {"conv2_1", {106, 106, 16}, {106, 106, 32}},
        {"conv2_2", {106, 106, 32}, {106, 106, 32}}, {"maxpool_2", {106, 106, 32}, {53, 53, 32}},
        {"conv3_1", {53, 53, 32}, {53, 53, 64}},     {"conv3_2", {53, 53, 64}, {53, 53, 64}},
        {"maxpool_3", {53, 53, 64}, {26, 26, 64}},   {"conv4_1", {26, 26, 64}, {26, 26, 128}},
        {"conv4_2", {26, 26, 128}, {26, 26, 128}},   {"maxpool_4", {26, 26, 128}, {13, 13, 128}},
        {"fc_1", {13, 13, 128}, {1, 1, 512}},        {"fc_2", {1, 1, 512}, {1, 1, 512}},
        {"score", {1, 1, 512}, {1, 1, 2}},
    };
    for (std::size_t i = 0; i < 15; ++i) {
        CAPTURE(i);
        CHECK(shapes[i].name == table[i].name);
        CHECK(shapes[i].in == table[i].in);
        CHECK(shapes[i].out == table[i].out);
    }
}

TEST_CASE("layer census and parameter count") {
    const auto spec = NetworkSpec::deadnet();
    int conv = 0, fcs = 0, pools = 0;
    for (const auto& l : spec.layers) {
        conv += l.kind == LayerKind::Conv;
        fcs += l.kind == LayerKind::FullyConnected || l.kind == LayerKind::Score;
        pools += l.kind == LayerKind::MaxPool;
    }
    CHECK(conv == 8);
    CHECK(fcs == 3);
    CHECK(pools == 4);
    // per-layer tally (weights + BN scale/shift, score weights + bias) done by hand before the build
    CHECK(Network(spec).parameter_count() == 11635666);
    CHECK(Network(NetworkSpec::deadnet64()).parameter_count() == 1149906);
}

TEST_CASE("inconsistent specs are rejected") {
    auto spec = NetworkSpec::deadnet(16);  // 16 - 9 + 1 = 8 -> 4 -> 2 -> 1 -> pool of 2 on 1 fails
    CHECK_THROWS_AS(spec.shapes(), ShapeError);
    auto bad = NetworkSpec::deadnet();
    bad.classes = 1;
    CHECK_THROWS_AS(bad.shapes(), ShapeError);
    auto wrong_score = NetworkSpec::deadnet();
    wrong_score.layers.back().out_channels = 3;
    CHECK_THROWS_AS(Network{wrong_score}, ShapeError);
}

TEST_CASE("xavier init") {
    Network a(NetworkSpec::deadnet64()), b(NetworkSpec::deadnet64());
    xavier_init(a, 42);
    xavier_init(b, 42);
    for (std::size_t i = 0; i < a.layers().size(); ++i) CHECK(a.layers()[i].weights == b.layers()[i].weights);

    const auto idx = a.spec().layer_index("conv2_1");
    const auto& w = a.layers()[idx].weights;
    REQUIRE(w.size() == 4608);
    double mean = 0, var = 0;
    for (float v : w.data()) mean += v;
    mean /= static_cast<double>(w.size());
    for (float v : w.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(w.size());
    const double expected = 2.0 / (144.0 + 288.0);
    CHECK(std::abs(var - expected) / expected < 0.10);

    for (const auto& p : a.layers()) {
        for (float v : p.bn_shift.data()) CHECK(v == 0.0f);
        for (float v : p.bn_scale.data()) CHECK(v == 1.0f);
        for (float v : p.bias.data()) CHECK(v == 0.0f);
    }
}

TEST_CASE("forward pass") {
    Network net(NetworkSpec::deadnet64());
    xavier_init(net, 1);
    auto img = random_image(net.spec().input, 3);
    auto pass = net.predict(img);
    REQUIRE(pass.probs.shape() == Shape{1, 2});
    CHECK(std::abs(pass.probs[0] + pass.probs[1] - 1.0f) < 1e-6);
    CHECK(pass.activation("conv4_2").shape() == Shape{1, 7, 7, 128});

    auto again = net.predict(img);
    CHECK(again.scores == pass.scores);

    Tensor zero({64, 64, 1});
    const auto first = net.predict(zero).scores;
    for (int i = 0; i < 1000; ++i) REQUIRE(net.predict(zero).scores == first);

    CHECK_THROWS_AS(net.predict(Tensor({32, 32, 1})), ShapeError);
    Tensor nan_img({64, 64, 1});
    nan_img[5] = std::nanf("");
    CHECK_THROWS_AS(net.predict(nan_img), NumericError);
}

TEST_CASE("full-size forward caches Conv4_2 at 26x26x128") {
    Network net(NetworkSpec::deadnet());
    xavier_init(net, 2);
    auto pass = net.predict(random_image(net.spec().input, 4));
    CHECK(pass.activation("conv4_2").shape() == Shape{1, 26, 26, 128});
    CHECK(pass.activation("maxpool_4").shape() == Shape{1, 13, 13, 128});
    CHECK(std::abs(pass.probs[0] + pass.probs[1] - 1.0f) < 1e-6);
}

TEST_CASE("checkpoint round trip") {
    Network net(NetworkSpec::deadnet64());
    xavier_init(net, 9);
    // move BN running statistics away from their defaults
    Tensor batch({4, 64, 64, 1});
    std::mt19937_64 rng(1);
    std::normal_distribution<float> n;
    for (auto& v : batch.data()) v = n(rng);
    net.forward(batch, OpContext{true, 5});

    const auto path = temp_path("roundtrip.ckpt");
    save_checkpoint(net, path, 123, 77);
    auto ck = load_checkpoint(path);
    CHECK(ck.iteration == 123);
    CHECK(ck.seed == 77);
    CHECK(ck.network.spec() == net.spec());
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const auto& a = net.layers()[i];
        const auto& b = ck.network.layers()[i];
        CHECK(a.weights == b.weights);
        CHECK(a.bias == b.bias);
        CHECK(a.bn_scale == b.bn_scale);
        CHECK(a.bn_shift == b.bn_shift);
        CHECK(a.bn.running_mean == b.bn.running_mean);
        CHECK(a.bn.running_var == b.bn.running_var);
    }
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto img = random_image(net.spec().input, 100 + s);
        CHECK(net.predict(img).scores == ck.network.predict(img).scores);
    }

    // saving the loaded network reproduces the file byte for byte
    const auto path2 = temp_path("roundtrip2.ckpt");
    save_checkpoint(ck.network, path2, 123, 77);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), {}), b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);

    SUBCASE("truncated file") {
        const auto cut = temp_path("truncated.ckpt");
        std::ofstream(cut, std::ios::binary).write(b1.data(), static_cast<std::streamsize>(b1.size() / 2));
        CHECK_THROWS_AS(load_checkpoint(cut), FormatError);
    }
    SUBCASE("flipped byte") {
        auto bad = b1;
        bad[bad.size() / 2] ^= 0x40;
        const auto p = temp_path("flipped.ckpt");
        std::ofstream(p, std::ios::binary).write(bad.data(), static_cast<std::streamsize>(bad.size()));
        CHECK_THROWS_AS(load_checkpoint(p), FormatError);
    }
    SUBCASE("mismatched spec names the first differing layer") {
        auto other = NetworkSpec::deadnet64();
        other.layers[3].out_channels = 48;
        try {
            load_checkpoint(path, other);
            FAIL("expected a mismatch");
        } catch (const ShapeError& e) {
            CHECK(std::string(e.what()).find("conv2_1") != std::string::npos);
        }
        CHECK_NOTHROW(load_checkpoint(path, NetworkSpec::deadnet64()));
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(temp_path("nope.ckpt")), IoError); }
}

TEST_CASE("network gradients match finite differences on a small net") {
    // Same layer kinds as DeadNet on a tiny input so every parameter can be probed.
    NetworkSpec spec;
    spec.input = {10, 10, 1};
    spec.layers = {
        {"c1", LayerKind::Conv, 3, 1, 1, 3, true, 0.0},
        {"p1", LayerKind::MaxPool, 2, 2, 0, 0, false, 0.0},
        {"c2", LayerKind::Conv, 3, 1, 0, 4, true, 0.0},
        {"f1", LayerKind::FullyConnected, 1, 1, 0, 6, true, 0.5},
        {"score", LayerKind::Score, 1, 1, 0, 2, false, 0.0},
    };
    Network64 net(spec);
    xavier_init(net, 3);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n;
    Tensor64 batch({4, 10, 10, 1});
    for (auto& v : batch.data()) v = n(rng);
    const std::vector<int> labels{0, 1, 1, 0};
    const OpContext ctx{true, 21};
    auto loss = [&] {
        auto p = net.forward(batch, ctx);
        return softmax_xent(p.scores, labels).loss;
    };
    auto pass = net.forward(batch, ctx);
    auto grads = net.backward(pass, softmax_xent(pass.scores, labels).grad_logits);
    auto params = net.parameters();
    auto gslots = Network64::gradient_slots(grads, net);
    REQUIRE(params.size() == gslots.size());
    GradientReport total;
    for (std::size_t i = 0; i < params.size(); ++i) {
        CAPTURE(params[i].name);
        auto r = gradient_check(loss, *params[i].value, *gslots[i].value, 16, i);
        CHECK(r.passed(1e-4));
        total = merge(total, r);
    }
    CHECK(gradient_check(loss, batch, grads.input, 50, 99).passed(1e-4));
}
