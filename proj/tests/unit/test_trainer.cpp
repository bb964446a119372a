#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "deadnet/trainer.hpp"
#include "doctest.h"

using namespace deadnet;

namespace {

NetworkSpec tiny_spec() {
    NetworkSpec spec;
    spec.input = {16, 16, 1};
    spec.layers = {
        {"c1", LayerKind::Conv, 3, 1, 1, 4, true, 0.0},
        {"p1", LayerKind::MaxPool, 2, 2, 0, 0, false, 0.0},
        {"c2", LayerKind::Conv, 3, 1, 1, 8, true, 0.0},
        {"p2", LayerKind::MaxPool, 2, 2, 0, 0, false, 0.0},
        {"f1", LayerKind::FullyConnected, 1, 1, 0, 16, true, 0.5},
        {"score", LayerKind::Score, 1, 1, 0, 2, false, 0.0},
    };
    return spec;
}

std::vector<LabeledImage> synthetic_set(std::size_t per_class, std::uint64_t seed, std::size_t extent = 20) {
    SyntheticSpec spec;
    spec.height = spec.width = extent;
    spec.seed = seed;
    std::vector<LabeledImage> out;
    for (auto label : {Label::Healthy, Label::Sick})
        for (auto& s : generate_synthetic(spec, label, per_class))
            out.push_back({std::move(s.image), class_index(label), s.record.path, s.record.stage_position});
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("inverse learning-rate schedule") {
    TrainConfig cfg;
    CHECK(inv_lr(0, cfg) == doctest::Approx(3e-4).epsilon(1e-12));
    CHECK(inv_lr(10000, cfg) == doctest::Approx(1.78381e-4).epsilon(1e-5));
    auto flat = cfg;
    flat.lr_gamma = 0;
    for (std::uint64_t t : {0ull, 10ull, 1000000ull}) CHECK(inv_lr(t, flat) == 3e-4);
    double prev = inv_lr(0, cfg);
    for (std::uint64_t t = 1; t < 50000; t += 97) {
        const double lr = inv_lr(t, cfg);
        REQUIRE(lr <= prev);
        prev = lr;
    }
}

TEST_CASE("nesterov step") {
    Tensor64 w({1}, 1.0), g({1}, 1.0), v({1}, 0.0);
    nesterov_step(w, g, v, 0.1, 0.9, 0.0);
    CHECK(v[0] == doctest::Approx(-0.1));
    CHECK(w[0] == doctest::Approx(0.81));

    Tensor64 w2({3}, std::vector<double>{1, -2, 3}), g2({3}, std::vector<double>{0.5, 0.5, -1}), v2({3}, 0.0);
    const auto before = w2;
    nesterov_step(w2, g2, v2, 0.01, 0.0, 0.1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(w2[i] == doctest::Approx(before[i] - 0.01 * (g2[i] + 0.1 * before[i])));

    Tensor64 w3({4}, std::vector<double>{1, -1, 2, -0.5}), zero({4}, 0.0), v3({4}, 0.0);
    for (int step = 0; step < 5; ++step) {
        const auto prev = w3;
        nesterov_step(w3, zero, v3, 0.1, 0.9, 1e-2);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(w3[i]) < std::abs(prev[i]));
    }
    Tensor64 bad({2});
    CHECK_THROWS_AS(nesterov_step(w3, bad, v3, 0.1, 0.9, 0.0), ShapeError);
}

TEST_CASE("decay leaves BN parameters and biases alone") {
    Network net(tiny_spec());
    xavier_init(net, 1);
    auto params = net.parameters();
    for (auto& p : params) {
        const auto before = *p.value;
        Tensor zero(p.value->shape()), vel(p.value->shape());
        nesterov_step(*p.value, zero, vel, 0.1, 0.9, p.decay ? 1e-3 : 0.0);
        if (!p.decay) CHECK(*p.value == before);
        if (p.decay) CHECK_FALSE(*p.value == before);
        CHECK(p.decay == (p.name.find(".weights") != std::string::npos));
    }
}

TEST_CASE("one plain SGD step lowers the loss by lr * |g|^2") {
    Network64 net(tiny_spec());
    xavier_init(net, 4);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    Tensor64 batch({6, 16, 16, 1});
    for (auto& v : batch.data()) v = n(rng);
    const std::vector<int> labels{0, 1, 0, 1, 1, 0};
    const OpContext ctx{true, 5};
    auto pass = net.forward(batch, ctx);
    const auto xent = softmax_xent(pass.scores, labels);
    auto grads = net.backward(pass, xent.grad_logits);
    auto params = net.parameters();
    auto gslots = Network64::gradient_slots(grads, net);
    double g2 = 0;
    for (auto& g : gslots)
        for (double v : g.value->data()) g2 += v * v;
    const double lr = 1e-6;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor64 vel(params[i].value->shape());
        nesterov_step(*params[i].value, *gslots[i].value, vel, lr, 0.0, 0.0);
    }
    const double after = softmax_xent(net.forward(batch, ctx).scores, labels).loss;
    const double predicted = -lr * g2;
    CHECK(std::abs((after - xent.loss) - predicted) / std::abs(predicted) < 0.10);
}

TEST_CASE("untrained loss is near ln 2 on a balanced batch") {
    // inference mode with fresh running statistics
    Network net(NetworkSpec::deadnet64());
    SyntheticSpec spec;
    spec.seed = 3;
    std::vector<LabeledImage> batch;
    for (auto label : {Label::Healthy, Label::Sick})
        for (auto& s : generate_synthetic(spec, label, 10))
            batch.push_back({std::move(s.image), class_index(label), s.record.path, s.record.stage_position});
    for (std::uint64_t seed : {7, 8, 9}) {
        xavier_init(net, seed);
        const double loss = evaluate(net, batch).loss;
        CAPTURE(seed);
        CHECK(std::abs(loss - std::log(2.0)) <= 0.15);
    }
}

TEST_CASE("training is deterministic per seed and learns the tiny task") {
    const auto data = synthetic_set(60, 1);
    const auto split = split_by_position(data, 0.3, 4);
    TrainConfig cfg;
    cfg.max_iterations = 150;
    cfg.eval_interval = 50;
    cfg.batch_size = 10;
    cfg.base_lr = 0.01;
    cfg.seed = 12;

    Network a(tiny_spec()), b(tiny_spec());
    xavier_init(a, 3);
    xavier_init(b, 3);
    std::size_t callbacks = 0;
    const auto log_a = train(a, split.train, split.test, cfg, [&](const TrainRecord&) { ++callbacks; });
    const auto log_b = train(b, split.train, split.test, cfg);
    CHECK(callbacks == 3);
    CHECK(log_a == log_b);
    REQUIRE(log_a.records.size() == 3);
    CHECK(log_a.records[0].iteration == 50);
    CHECK(log_a.records[2].iteration == 150);
    CHECK(log_a.records.back().train_loss < log_a.records.front().train_loss);

    const auto dir = std::filesystem::temp_directory_path();
    save_checkpoint(a, dir / "deadnet_test_train_a.ckpt", 150, 12);
    save_checkpoint(b, dir / "deadnet_test_train_b.ckpt", 150, 12);
    CHECK(slurp(dir / "deadnet_test_train_a.ckpt") == slurp(dir / "deadnet_test_train_b.ckpt"));

    const auto csv = log_a.to_csv();
    CHECK(csv.rfind("iteration,train_loss,val_loss,val_acc\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

    auto other = cfg;
    other.seed = 13;
    Network c(tiny_spec());
    xavier_init(c, 3);
    CHECK_FALSE(train(c, split.train, split.test, other) == log_a);
}

TEST_CASE("training input errors") {
    Network net(tiny_spec());
    xavier_init(net, 1);
    auto data = synthetic_set(10, 2);
    std::vector<LabeledImage> healthy_only(data.begin(), data.begin() + 10);
    TrainConfig cfg;
    cfg.max_iterations = 1;
    cfg.batch_size = 4;
    CHECK_THROWS_WITH_AS(train(net, healthy_only, {}, cfg), doctest::Contains("no images of class 1"), Error);
    auto small = data;
    small[3].image = Tensor({8, 8, 1}, 0.5f);
    CHECK_THROWS_AS(train(net, small, {}, cfg), ShapeError);
    cfg.batch_size = 1;
    CHECK_THROWS(train(net, data, {}, cfg));
}

TEST_CASE("evaluate") {
    Network net(tiny_spec());
    xavier_init(net, 9);
    auto data = synthetic_set(20, 5);

    // relabel with the network's own predictions: a perfect predictor
    const auto first = evaluate(net, data);
    auto perfect = data;
    for (std::size_t i = 0; i < data.size(); ++i) perfect[i].label = first.items[i].predicted;
    CHECK(evaluate(net, perfect).accuracy == 1.0);

    // recount oracle
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto crop = center_crop(data[i].image, net.spec().input, true);
        const auto probs = net.predict(crop).probs;
        const int predicted = probs[1] > probs[0] ? 1 : 0;
        CHECK(first.items[i].predicted == predicted);
        CHECK(first.items[i].p_sick == doctest::Approx(probs[1]).epsilon(1e-6));
        correct += predicted == data[i].label;
    }
    CHECK(first.accuracy == doctest::Approx(double(correct) / data.size()));

    // constant predictor on a balanced set
    auto& score = net.layers().back();
    score.weights.fill(0.0f);
    score.bias = Tensor({2}, std::vector<float>{1.0f, 0.0f});
    const auto constant = evaluate(net, data);
    CHECK(constant.accuracy == 0.5);
    for (const auto& c : constant.items) CHECK(c.predicted == 0);
}
