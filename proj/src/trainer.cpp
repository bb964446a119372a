#include "deadnet/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "deadnet/augment.hpp"
#include "deadnet/parallel.hpp"
#include "deadnet/random.hpp"
#include "json.hpp"

namespace deadnet {

void TrainConfig::validate() const {
    if (!(base_lr > 0.0)) throw Error("base_lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must lie in [0, 1)");
    if (weight_decay < 0.0) throw Error("weight decay must be non-negative");
    if (batch_size < 2) throw Error("batch size must be at least 2 (batch norm)");
    if (lr_gamma < 0.0 || lr_power < 0.0) throw Error("lr schedule constants must be non-negative");
    if (eval_interval == 0) throw Error("eval interval must be positive");
}

double inv_lr(std::uint64_t iter, const TrainConfig& cfg) {
    return cfg.base_lr * std::pow(1.0 + cfg.lr_gamma * static_cast<double>(iter), -cfg.lr_power);
}

template <typename T>
void nesterov_step(BasicTensor<T>& weights, const BasicTensor<T>& grads, BasicTensor<T>& velocity, double lr,
                   double momentum, double weight_decay) {
    if (grads.shape() != weights.shape() || velocity.shape() != weights.shape()) {
        throw ShapeError("nesterov_step: weights " + shape_string(weights.shape()) + ", grads " +
                         shape_string(grads.shape()) + ", velocity " + shape_string(velocity.shape()));
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double g = static_cast<double>(grads[i]) + weight_decay * static_cast<double>(weights[i]);
        const double v = momentum * static_cast<double>(velocity[i]) - lr * g;
        const double w = static_cast<double>(weights[i]) + momentum * v - lr * g;
        if (!std::isfinite(w) || !std::isfinite(v)) throw NumericError("non-finite parameter update");
        velocity[i] = static_cast<T>(v);
        weights[i] = static_cast<T>(w);
    }
}

template void nesterov_step(Tensor&, const Tensor&, Tensor&, double, double, double);
template void nesterov_step(Tensor64&, const Tensor64&, Tensor64&, double, double, double);

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os << "iteration,train_loss,val_loss,val_acc\n" << std::setprecision(9);
    for (const auto& r : records) os << r.iteration << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_acc << '\n';
    return os.str();
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << to_csv();
}

namespace {

void require_image(const LabeledImage& item, const Extent& input) {
    const auto& s = item.image.shape();
    if (s.size() != 3 || s[2] != input.channels || s[0] < input.height || s[1] < input.width) {
        throw ShapeError("image '" + item.id + "' of shape " + shape_string(s) + " cannot supply a " +
                         std::to_string(input.height) + "x" + std::to_string(input.width) + " crop");
    }
}

void place(Tensor& batch, std::size_t slot, const Tensor& image) {
    const auto n = image.size();
    std::copy(image.data().begin(), image.data().end(), batch.data().begin() + static_cast<std::ptrdiff_t>(slot * n));
}

Tensor take_crop(const Tensor& image, std::size_t y, std::size_t x, const Extent& input, bool normalize) {
    Tensor c = crop(image, y, x, input.height, input.width);
    return normalize ? variance_normalize(c) : c;
}

}  // namespace

std::string to_json_line(const Classification& c) {
    nlohmann::ordered_json j;
    j["id"] = c.id;
    j["label"] = c.label;
    j["predicted"] = c.predicted;
    j["p_sick"] = c.p_sick;
    return j.dump();
}

Classification classification_from_json(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        Classification c;
        c.id = j.value("id", std::string());
        c.label = j.at("label").get<int>();
        c.predicted = j.at("predicted").get<int>();
        c.p_sick = j.value("p_sick", c.predicted == kSickClass ? 1.0 : 0.0);
        if (c.label < 0 || c.label > 1 || c.predicted < 0 || c.predicted > 1) {
            throw FormatError("classification classes must be 0 or 1");
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed classification: ") + e.what());
    }
}

void write_classifications(const std::filesystem::path& path, const std::vector<Classification>& items) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& c : items) out << to_json_line(c) << '\n';
    if (!out) throw IoError("write to " + path.string() + " failed");
}

std::vector<Classification> read_classifications(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<Classification> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(classification_from_json(line));
        } catch (const Error& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

Tensor center_crop(const Tensor& image, const Extent& input, bool normalize) {
    if (image.rank() != 3 || image.dim(0) < input.height || image.dim(1) < input.width) {
        throw ShapeError("image " + shape_string(image.shape()) + " smaller than the network input");
    }
    return take_crop(image, (image.dim(0) - input.height) / 2, (image.dim(1) - input.width) / 2, input, normalize);
}

Evaluation evaluate(const Network& network, const std::vector<LabeledImage>& data, bool normalize) {
    const auto& input = network.spec().input;
    for (const auto& item : data) require_image(item, input);
    Evaluation ev;
    ev.items.resize(data.size());
    std::vector<double> losses(data.size());
    constexpr std::size_t chunk = 16;
    const std::size_t chunks = (data.size() + chunk - 1) / chunk;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t lo = c * chunk, hi = std::min(data.size(), lo + chunk);
        Tensor batch({hi - lo, input.height, input.width, input.channels});
        std::vector<int> labels;
        for (std::size_t i = lo; i < hi; ++i) {
            place(batch, i - lo, center_crop(data[i].image, input, normalize));
            labels.push_back(data[i].label);
        }
        const auto pass = network.predict(batch);
        const std::size_t k = network.spec().classes;
        for (std::size_t i = lo; i < hi; ++i) {
            const auto row = pass.probs.data().subspan((i - lo) * k, k);
            const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
            ev.items[i] = {data[i].id, data[i].label, best, static_cast<double>(row[kSickClass])};
            losses[i] = -std::log(std::max<double>(row[static_cast<std::size_t>(data[i].label)], 1e-30));
        }
    });
    if (!data.empty()) {
        std::size_t correct = 0;
        for (const auto& c : ev.items) correct += c.correct();
        ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
        ev.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(data.size());
    }
    return ev;
}

TrainLog train(Network& network, const std::vector<LabeledImage>& training,
               const std::vector<LabeledImage>& validation, const TrainConfig& cfg, const TrainProgress& progress) {
    cfg.validate();
    const auto& input = network.spec().input;
    const auto classes = static_cast<int>(network.spec().classes);
    std::vector<std::size_t> per_class(network.spec().classes, 0);
    for (const auto& item : training) {
        require_image(item, input);
        if (item.label < 0 || item.label >= classes) throw Error("label out of range for '" + item.id + "'");
        ++per_class[static_cast<std::size_t>(item.label)];
    }
    for (std::size_t c = 0; c < per_class.size(); ++c)
        if (per_class[c] == 0) throw Error("training set has no images of class " + std::to_string(c));
    if (training.size() < cfg.batch_size) throw Error("training set smaller than one batch");

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(training.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    auto params = network.parameters();
    std::vector<Tensor> velocity;
    for (const auto& p : params) velocity.emplace_back(p.value->shape());

    TrainLog log;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    Tensor batch({cfg.batch_size, input.height, input.width, input.channels});
    std::vector<int> labels(cfg.batch_size);

    for (std::uint64_t iter = 0; iter < cfg.max_iterations; ++iter) {
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const auto& item = training[order[cursor++]];
            const std::size_t y = std::uniform_int_distribution<std::size_t>(0, item.image.dim(0) - input.height)(rng);
            const std::size_t x = std::uniform_int_distribution<std::size_t>(0, item.image.dim(1) - input.width)(rng);
            place(batch, b, take_crop(item.image, y, x, input, cfg.normalize_crops));
            labels[b] = item.label;
        }
        const auto pass = network.forward(batch, OpContext{true, mix_seed(cfg.seed, iter)});
        const auto xent = softmax_xent(pass.scores, labels);
        if (!std::isfinite(xent.loss)) {
            throw NumericError("non-finite training loss at iteration " + std::to_string(iter));
        }
        auto grads = network.backward(pass, xent.grad_logits);
        const auto gslots = Network::gradient_slots(grads, network);
        const double lr = inv_lr(iter, cfg);
        for (std::size_t i = 0; i < params.size(); ++i) {
            nesterov_step(*params[i].value, *gslots[i].value, velocity[i], lr, cfg.momentum,
                          params[i].decay ? cfg.weight_decay : 0.0);
        }
        loss_sum += xent.loss;
        ++loss_count;

        if ((iter + 1) % cfg.eval_interval == 0 || iter + 1 == cfg.max_iterations) {
            TrainRecord rec;
            rec.iteration = iter + 1;
            rec.train_loss = loss_sum / static_cast<double>(loss_count);
            if (!validation.empty()) {
                const auto ev = evaluate(network, validation, cfg.normalize_crops);
                rec.val_loss = ev.loss;
                rec.val_acc = ev.accuracy;
            }
            log.records.push_back(rec);
            if (progress) progress(rec);
            loss_sum = 0.0;
            loss_count = 0;
        }
    }
    return log;
}

}  // namespace deadnet
