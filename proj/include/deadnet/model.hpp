#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deadnet/ops.hpp"
#include "deadnet/tensor.hpp"

namespace deadnet {

enum class LayerKind { Conv, MaxPool, FullyConnected, Score };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view text);

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Conv;
    std::size_t kernel = 1;        // conv kernel / pool window
    std::size_t stride = 1;
    std::size_t pad = 0;
    std::size_t out_channels = 0;  // conv maps, fc units or classes; unused for pools
    bool batch_norm = true;        // conv and fc only; layers without it carry a bias
    double dropout = 0.0;          // fc only

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Extent {
    std::size_t height = 0, width = 0, channels = 0;

    std::size_t size() const { return height * width * channels; }
    friend bool operator==(const Extent&, const Extent&) = default;
};

std::string to_string(const Extent& e);

struct LayerShape {
    std::string name;
    Extent in;
    Extent out;
};

struct NetworkSpec {
    Extent input{220, 220, 1};
    std::size_t classes = 2;
    std::vector<LayerSpec> layers;

    /// The 15-layer DeadNet: 8 conv, 4 max-pool, 2 fc and the score layer.
    /// `input_extent` 220 gives the full network, 64 the desk-scale variant.
    static NetworkSpec deadnet(std::size_t input_extent = 220, std::size_t classes = 2);
    static NetworkSpec deadnet64() { return deadnet(64); }

    /// Chains the layer shapes; throws ShapeError on any inconsistency.
    std::vector<LayerShape> shapes() const;
    std::size_t layer_index(std::string_view name) const;
    std::string to_json() const;
    static NetworkSpec from_json(std::string_view text);

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

template <typename T>
struct LayerParameters {
    BasicTensor<T> weights;  // conv: out x k x k x in; fc/score: out x in
    BasicTensor<T> bias;     // score layer and BN-less layers
    BasicTensor<T> bn_scale;
    BasicTensor<T> bn_shift;
    BatchNormState<T> bn;
};

template <typename T>
struct LayerGradients {
    BasicTensor<T> weights;
    BasicTensor<T> bias;
    BasicTensor<T> bn_scale;
    BasicTensor<T> bn_shift;
};

template <typename T>
struct LayerCache {
    BasicTensor<T> input;
    BasicTensor<T> linear;  // conv/fc output before normalization
    BatchNormCache<T> bn;
    BasicTensor<T> pre_relu;
    BasicTensor<T> dropout_mask;
    BasicTensor<T> output;
};

template <typename T>
struct ForwardPass {
    BasicTensor<T> scores;  // n x classes, pre-softmax
    BasicTensor<T> probs;   // n x classes
    std::vector<std::string> names;
    std::vector<LayerCache<T>> layers;

    const BasicTensor<T>& activation(std::string_view layer) const;
};

template <typename T>
struct BackwardPass {
    std::vector<LayerGradients<T>> params;
    std::vector<BasicTensor<T>> outputs;  // d/d(layer output)
    BasicTensor<T> input;
};

/// A named view of one learnable tensor, in a fixed traversal order shared by
/// parameters and gradients.
template <typename T>
struct ParameterSlot {
    std::string name;
    BasicTensor<T>* value;
    bool decay;  // conv/fc/score weights only
};

template <typename T>
class BasicNetwork {
public:
    explicit BasicNetwork(NetworkSpec spec);

    const NetworkSpec& spec() const noexcept { return spec_; }
    const std::vector<LayerShape>& shapes() const noexcept { return shapes_; }
    std::vector<LayerParameters<T>>& layers() noexcept { return params_; }
    const std::vector<LayerParameters<T>>& layers() const noexcept { return params_; }

    /// Runs the network on an h x w x c image or an n x h x w x c batch. In
    /// training mode BN uses batch statistics (and updates its running
    /// statistics) and dropout is active.
    ForwardPass<T> forward(const BasicTensor<T>& images, const OpContext& ctx);

    /// Inference-mode forward; never mutates the network.
    ForwardPass<T> predict(const BasicTensor<T>& images) const;

    /// Backpropagates `grad_scores` (n x classes) through the cached pass.
    BackwardPass<T> backward(const ForwardPass<T>& pass, const BasicTensor<T>& grad_scores) const;

    std::vector<ParameterSlot<T>> parameters();
    static std::vector<ParameterSlot<T>> gradient_slots(BackwardPass<T>& grads, const BasicNetwork& like);

    std::size_t parameter_count() const;

    template <typename U>
    BasicNetwork<U> converted() const;

private:
    ForwardPass<T> run(const BasicTensor<T>& images, const OpContext& ctx,
                       std::vector<LayerParameters<T>>& params) const;

    NetworkSpec spec_;
    std::vector<LayerShape> shapes_;
    std::vector<LayerParameters<T>> params_;
};

using Network = BasicNetwork<float>;
using Network64 = BasicNetwork<double>;

/// Uniform Glorot initialization: weights ~ U(+-sqrt(6/(fan_in+fan_out))),
/// BN scale 1, shift 0, biases 0, running statistics reset.
template <typename T>
void xavier_init(BasicNetwork<T>& network, std::uint64_t seed);

// ---- checkpoints -----------------------------------------------------------

struct Checkpoint {
    Network network;
    std::uint64_t iteration = 0;
    std::uint64_t seed = 0;
};

inline constexpr char kCheckpointMagic[8] = {'D', 'E', 'A', 'D', 'N', 'E', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Network& network, const std::filesystem::path& path, std::uint64_t iteration = 0,
                     std::uint64_t seed = 0);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Loads and verifies the stored architecture against `expected`, naming the
/// first mismatching layer on failure.
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkSpec& expected);

}  // namespace deadnet
