#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "deadnet/dataset.hpp"
#include "deadnet/model.hpp"

namespace deadnet {

struct TrainConfig {
    double base_lr = 3e-4;
    double momentum = 0.9;
    double weight_decay = 1e-3;
    std::size_t batch_size = 20;
    std::size_t max_iterations = 3000;
    double lr_gamma = 1e-4;
    double lr_power = 0.75;
    std::size_t eval_interval = 100;
    std::uint64_t seed = 1;
    bool normalize_crops = true;  // variance-normalize each crop before the net

    void validate() const;
};

/// base_lr * (1 + gamma * iter)^(-power)
double inv_lr(std::uint64_t iter, const TrainConfig& cfg);

/// g' = g + wd * w;  v <- mu v - lr g';  w <- w + mu v - lr g'
template <typename T>
void nesterov_step(BasicTensor<T>& weights, const BasicTensor<T>& grads, BasicTensor<T>& velocity, double lr,
                   double momentum, double weight_decay);

struct LabeledImage {
    Tensor image;  // h x w x 1, at least the network input extent
    int label = 0;
    std::string id;
    std::string stage_position;
};

inline const std::string& stage_position_of(const LabeledImage& item) { return item.stage_position; }

struct TrainRecord {
    std::uint64_t iteration = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;

    friend bool operator==(const TrainRecord&, const TrainRecord&) = default;
};

struct TrainLog {
    std::vector<TrainRecord> records;

    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
    friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

struct Classification {
    std::string id;
    int label = 0;
    int predicted = 0;
    double p_sick = 0.0;

    bool correct() const { return label == predicted; }
};

// classifications as JSON-lines {"id", "label", "predicted", "p_sick"}
std::string to_json_line(const Classification& c);
Classification classification_from_json(std::string_view line);
void write_classifications(const std::filesystem::path& path, const std::vector<Classification>& items);
std::vector<Classification> read_classifications(const std::filesystem::path& path);

struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
    std::vector<Classification> items;
};

/// Centered network-input crop, optionally variance-normalized.
Tensor center_crop(const Tensor& image, const Extent& input, bool normalize);

/// Inference-mode accuracy and mean cross-entropy over center crops.
Evaluation evaluate(const Network& network, const std::vector<LabeledImage>& data, bool normalize = true);

using TrainProgress = std::function<void(const TrainRecord&)>;

/// Mini-batch Nesterov SGD with random crops and shuffle-each-epoch sampling.
/// Deterministic per cfg.seed. `validation` may be empty (val fields then 0).
TrainLog train(Network& network, const std::vector<LabeledImage>& training,
               const std::vector<LabeledImage>& validation, const TrainConfig& cfg,
               const TrainProgress& progress = {});

}  // namespace deadnet
