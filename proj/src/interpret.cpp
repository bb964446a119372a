#include "deadnet/interpret.hpp"

#include <cmath>

namespace deadnet {

template <typename T>
GradCam<T> gradcam(const BasicNetwork<T>& network, const BasicTensor<T>& image, int target_class,
                   std::string_view layer) {
    const auto classes = static_cast<int>(network.spec().classes);
    if (target_class < 0 || target_class >= classes) {
        throw Error("class " + std::to_string(target_class) + " out of range for a " + std::to_string(classes) +
                    "-class network");
    }
    const std::size_t idx = network.spec().layer_index(std::string(layer));
    if (image.rank() != 3) throw ShapeError("gradcam expects a single h x w x c image");
    const auto pass = network.predict(image);
    BasicTensor<T> seed(pass.scores.shape());
    seed[static_cast<std::size_t>(target_class)] = T{1};
    const auto grads = network.backward(pass, seed);

    const auto& g = grads.outputs[idx];  // 1 x h x w x K
    const auto& a = pass.layers[idx].output;
    const std::size_t h = a.dim(1), w = a.dim(2), k = a.dim(3);
    GradCam<T> out;
    out.weights.layer = std::string(layer);
    out.weights.target_class = target_class;
    out.weights.domain = h * w;
    out.weights.alpha.assign(k, 0.0);
    for (std::size_t p = 0; p < h * w; ++p)
        for (std::size_t c = 0; c < k; ++c) out.weights.alpha[c] += static_cast<double>(g[p * k + c]);
    for (auto& v : out.weights.alpha) v /= static_cast<double>(h * w);
    out.features = a.reshaped({h, w, k});
    return out;
}

template <typename T>
Tensor gradcam_linear_map(const BasicTensor<T>& features, const std::vector<double>& alpha) {
    const auto& s = features.shape();
    if (!(s.size() == 3 || (s.size() == 4 && s[0] == 1))) {
        throw ShapeError("gradcam expects h x w x K feature maps, got " + shape_string(s));
    }
    const std::size_t k = s.back(), h = s[s.size() - 3], w = s[s.size() - 2];
    if (alpha.size() != k) {
        throw ShapeError("gradcam: " + std::to_string(alpha.size()) + " weights for " + std::to_string(k) + " maps");
    }
    Tensor out({h, w, 1});
    for (std::size_t p = 0; p < h * w; ++p) {
        double acc = 0;
        for (std::size_t c = 0; c < k; ++c) acc += alpha[c] * static_cast<double>(features[p * k + c]);
        out[p] = static_cast<float>(acc);
    }
    return out;
}

template <typename T>
Tensor gradcam_map(const BasicTensor<T>& features, const std::vector<double>& alpha) {
    auto m = gradcam_linear_map(features, alpha);
    for (auto& v : m.data()) v = std::max(v, 0.0f);
    return m;
}

EnsembleWeights ensemble_weights(const std::vector<GradCamWeights>& per_image, const std::vector<int>& image_classes,
                                 int target_class) {
    if (per_image.size() != image_classes.size()) throw Error("ensemble_weights: one class per image required");
    EnsembleWeights out;
    out.target_class = target_class;
    for (std::size_t i = 0; i < per_image.size(); ++i) {
        if (image_classes[i] != target_class) continue;
        const auto& a = per_image[i].alpha;
        if (out.alpha.empty()) out.alpha.assign(a.size(), 0.0);
        if (a.size() != out.alpha.size()) throw ShapeError("ensemble_weights: weight vectors differ in length");
        for (std::size_t k = 0; k < a.size(); ++k) out.alpha[k] += a[k];
        ++out.count;
    }
    if (out.count == 0) throw Error("no images of class " + std::to_string(target_class) + " to average");
    for (auto& v : out.alpha) v /= static_cast<double>(out.count);
    return out;
}

template <typename T>
BasicTensor<T> laplacian(const BasicTensor<T>& image) {
    if (image.rank() < 2 || (image.rank() == 3 && image.dim(2) != 1) || image.rank() > 3) {
        throw ShapeError("laplacian expects a single-channel image, got " + shape_string(image.shape()));
    }
    const std::size_t h = image.dim(0), w = image.dim(1);
    if (h < 3 || w < 3) throw ShapeError("laplacian needs at least a 3x3 image");
    BasicTensor<T> out(image.shape());
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const T c = image[y * w + x];
            const T up = image[(y ? y - 1 : y) * w + x], down = image[(y + 1 < h ? y + 1 : y) * w + x];
            const T left = image[y * w + (x ? x - 1 : x)], right = image[y * w + (x + 1 < w ? x + 1 : x)];
            out[y * w + x] = up + down + left + right - T{4} * c;
        }
    return out;
}

ClassModelResult class_model(const ScoreGradient& score_gradient, const Shape& image_shape,
                             const ClassModelConfig& cfg) {
    if (!(cfg.epsilon > 0)) throw Error("class model step must be positive");
    if (cfg.iterations == 0) throw Error("class model needs at least one iteration");
    ClassModelResult res;
    if (cfg.init == ClassModelConfig::Init::Image) {
        if (cfg.init_image.shape() != image_shape) throw ShapeError("class model init image has the wrong shape");
        res.image = cfg.init_image.cast<double>();
    } else {
        res.image = Tensor64(image_shape);
    }
    const double sign = cfg.add_laplacian ? 1.0 : -1.0;
    auto& img = res.image;
    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        const auto g = score_gradient(img);
        require_shape(g, image_shape, "class model score gradient");
        const bool smooth = cfg.lambda2 != 0.0;
        const auto lap = smooth ? laplacian(img) : Tensor64();
        for (std::size_t i = 0; i < img.size(); ++i) {
            double step = g[i] - cfg.lambda1 * img[i];
            if (smooth) step += sign * cfg.lambda2 * lap[i];
            img[i] += cfg.epsilon * step;
            if (!std::isfinite(img[i])) throw NumericError("class model diverged at iteration " + std::to_string(it));
        }
        if (cfg.snapshot_every && (it % cfg.snapshot_every == 0 || it == cfg.iterations)) {
            res.snapshots.push_back({it, img});
        }
    }
    return res;
}

ClassModelResult class_model(const Network& network, int target_class, const ClassModelConfig& cfg) {
    const auto& in = network.spec().input;
    const Shape shape{in.height, in.width, in.channels};
    if (target_class < 0 || target_class >= static_cast<int>(network.spec().classes)) {
        throw Error("class " + std::to_string(target_class) + " out of range");
    }
    auto gradient = [&](const Tensor64& image) {
        const auto pass = network.predict(image.cast<float>());
        Tensor seed(pass.scores.shape());
        seed[static_cast<std::size_t>(target_class)] = 1.0f;
        return network.backward(pass, seed).input.reshaped(shape).cast<double>();
    };
    return class_model(gradient, shape, cfg);
}

#define DEADNET_INTERPRET(T)                                                                                  \
    template GradCam<T> gradcam(const BasicNetwork<T>&, const BasicTensor<T>&, int, std::string_view);         \
    template Tensor gradcam_linear_map(const BasicTensor<T>&, const std::vector<double>&);                    \
    template Tensor gradcam_map(const BasicTensor<T>&, const std::vector<double>&);                           \
    template BasicTensor<T> laplacian(const BasicTensor<T>&);

DEADNET_INTERPRET(float)
DEADNET_INTERPRET(double)

#undef DEADNET_INTERPRET

}  // namespace deadnet
