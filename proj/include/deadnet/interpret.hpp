#pragma once

#include <functional>
#include <string>
#include <vector>

#include "deadnet/model.hpp"

namespace deadnet {

inline constexpr std::string_view kGradCamLayer = "conv4_2";

struct GradCamWeights {
    std::string layer;
    int target_class = 0;
    std::size_t domain = 0;     // |Omega_L| = h * w of the layer
    std::vector<double> alpha;  // one per feature map
};

template <typename T>
struct GradCam {
    GradCamWeights weights;
    BasicTensor<T> features;  // h x w x K activations of the layer
};

/// alpha_k = spatial mean of dS_c / dA^k, with S_c the pre-softmax score.
/// Runs in inference mode; `image` is a single h x w x c input.
template <typename T>
GradCam<T> gradcam(const BasicNetwork<T>& network, const BasicTensor<T>& image, int target_class,
                   std::string_view layer = kGradCamLayer);

template <typename T>
GradCamWeights gradcam_weights(const BasicNetwork<T>& network, const BasicTensor<T>& image, int target_class,
                               std::string_view layer = kGradCamLayer) {
    return gradcam(network, image, target_class, layer).weights;
}

/// sum_k alpha_k A^k without the final ReLU.
template <typename T>
Tensor gradcam_linear_map(const BasicTensor<T>& features, const std::vector<double>& alpha);

/// [sum_k alpha_k A^k]_+ as an h x w x 1 map.
template <typename T>
Tensor gradcam_map(const BasicTensor<T>& features, const std::vector<double>& alpha);

struct EnsembleWeights {
    int target_class = 0;
    std::size_t count = 0;  // N_c
    std::vector<double> alpha;
};

/// Mean of per-image weights over the images whose class equals `target_class`.
EnsembleWeights ensemble_weights(const std::vector<GradCamWeights>& per_image, const std::vector<int>& image_classes,
                                 int target_class);

/// 5-point stencil (-4 centre, +1 per 4-neighbour) with replicated borders.
template <typename T>
BasicTensor<T> laplacian(const BasicTensor<T>& image);

struct ClassModelConfig {
    double epsilon = 10.0;
    double lambda1 = 0.01;
    double lambda2 = 0.001;
    std::size_t iterations = 500;
    enum class Init { Zeros, Image } init = Init::Zeros;
    Tensor init_image;  // used with Init::Image, e.g. an image of the opposing class
    /// false: I += eps (g - l1 I - l2 lap I), the published form.
    /// true:  I += eps (g - l1 I + l2 lap I), the descent direction of a
    ///        1/2 |grad I|^2 smoothness penalty.
    bool add_laplacian = false;
    std::size_t snapshot_every = 50;  // 0 disables snapshots
};

struct ClassModelSnapshot {
    std::size_t iteration = 0;
    Tensor64 image;
};

struct ClassModelResult {
    Tensor64 image;
    std::vector<ClassModelSnapshot> snapshots;
};

using ScoreGradient = std::function<Tensor64(const Tensor64&)>;

/// Iterates the class-model update with an arbitrary dS_c/dI oracle.
ClassModelResult class_model(const ScoreGradient& score_gradient, const Shape& image_shape,
                             const ClassModelConfig& cfg);

/// dS_c/dI of the network in inference mode.
ClassModelResult class_model(const Network& network, int target_class, const ClassModelConfig& cfg);

}  // namespace deadnet
