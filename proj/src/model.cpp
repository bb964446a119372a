#include "deadnet/model.hpp"

#include <cmath>
#include <random>

#include "deadnet/random.hpp"
#include "json.hpp"

namespace deadnet {

namespace {

bool has_weights(LayerKind kind) { return kind != LayerKind::MaxPool; }

bool uses_bn(const LayerSpec& l) {
    return (l.kind == LayerKind::Conv || l.kind == LayerKind::FullyConnected) && l.batch_norm;
}

template <typename T>
void add_channel_bias(BasicTensor<T>& t, const BasicTensor<T>& bias) {
    const std::size_t c = bias.size();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += bias[i % c];
}

template <typename T>
BasicTensor<T> channel_sum(const BasicTensor<T>& t, std::size_t channels) {
    BasicTensor<T> out({channels});
    for (std::size_t i = 0; i < t.size(); ++i) out[i % channels] += t[i];
    return out;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv: return "conv";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::FullyConnected: return "fc";
        case LayerKind::Score: return "score";
    }
    return "?";
}

LayerKind parse_layer_kind(std::string_view text) {
    if (text == "conv") return LayerKind::Conv;
    if (text == "maxpool") return LayerKind::MaxPool;
    if (text == "fc") return LayerKind::FullyConnected;
    if (text == "score") return LayerKind::Score;
    throw FormatError("unknown layer kind '" + std::string(text) + "'");
}

std::string to_string(const Extent& e) {
    return std::to_string(e.height) + "x" + std::to_string(e.width) + "x" + std::to_string(e.channels);
}

NetworkSpec NetworkSpec::deadnet(std::size_t input_extent, std::size_t classes) {
    NetworkSpec spec;
    spec.input = {input_extent, input_extent, 1};
    spec.classes = classes;
    auto conv = [](std::string name, std::size_t k, std::size_t pad, std::size_t maps) {
        return LayerSpec{std::move(name), LayerKind::Conv, k, 1, pad, maps, true, 0.0};
    };
    auto pool = [](std::string name) { return LayerSpec{std::move(name), LayerKind::MaxPool, 2, 2, 0, 0, false, 0.0}; };
    spec.layers = {
        conv("conv1_1", 9, 0, 16),  conv("conv1_2", 3, 1, 16),  pool("maxpool_1"),
        conv("conv2_1", 3, 1, 32),  conv("conv2_2", 3, 1, 32),  pool("maxpool_2"),
        conv("conv3_1", 3, 1, 64),  conv("conv3_2", 3, 1, 64),  pool("maxpool_3"),
        conv("conv4_1", 3, 1, 128), conv("conv4_2", 3, 1, 128), pool("maxpool_4"),
        LayerSpec{"fc_1", LayerKind::FullyConnected, 1, 1, 0, 512, true, 0.5},
        LayerSpec{"fc_2", LayerKind::FullyConnected, 1, 1, 0, 512, true, 0.5},
        LayerSpec{"score", LayerKind::Score, 1, 1, 0, classes, false, 0.0},
    };
    return spec;
}

std::vector<LayerShape> NetworkSpec::shapes() const {
    if (classes < 2) throw ShapeError("network needs at least two classes");
    if (input.size() == 0) throw ShapeError("network input extents must be positive");
    if (layers.empty() || layers.back().kind != LayerKind::Score) {
        throw ShapeError("network must end in a score layer");
    }
    std::vector<LayerShape> out;
    Extent cur = input;
    for (const auto& l : layers) {
        Extent next;
        try {
            switch (l.kind) {
                case LayerKind::Conv:
                    if (l.out_channels == 0) throw ShapeError("zero output maps");
                    next = {conv_output_extent(cur.height, l.kernel, l.stride, l.pad),
                            conv_output_extent(cur.width, l.kernel, l.stride, l.pad), l.out_channels};
                    break;
                case LayerKind::MaxPool:
                    next = {pool_output_extent(cur.height, l.kernel, l.stride),
                            pool_output_extent(cur.width, l.kernel, l.stride), cur.channels};
                    break;
                case LayerKind::FullyConnected:
                case LayerKind::Score:
                    if (l.out_channels == 0) throw ShapeError("zero output units");
                    next = {1, 1, l.out_channels};
                    break;
            }
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + l.name + ": " + e.what());
        }
        if (l.kind == LayerKind::Score && l.out_channels != classes) {
            throw ShapeError("score layer emits " + std::to_string(l.out_channels) + " values for " +
                             std::to_string(classes) + " classes");
        }
        if (l.dropout < 0.0 || l.dropout >= 1.0) throw ShapeError("layer " + l.name + ": dropout outside [0, 1)");
        out.push_back({l.name, cur, next});
        cur = next;
    }
    return out;
}

std::size_t NetworkSpec::layer_index(std::string_view name) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].name == name) return i;
    throw NotFoundError("no layer named '" + std::string(name) + "'");
}

std::string NetworkSpec::to_json() const {
    nlohmann::json j;
    j["input"] = {input.height, input.width, input.channels};
    j["classes"] = classes;
    auto& arr = j["layers"] = nlohmann::json::array();
    for (const auto& l : layers) {
        arr.push_back({{"name", l.name},
                       {"kind", std::string(to_string(l.kind))},
                       {"kernel", l.kernel},
                       {"stride", l.stride},
                       {"pad", l.pad},
                       {"out", l.out_channels},
                       {"batch_norm", l.batch_norm},
                       {"dropout", l.dropout}});
    }
    return j.dump();
}

NetworkSpec NetworkSpec::from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        NetworkSpec spec;
        spec.input = {j.at("input").at(0).get<std::size_t>(), j.at("input").at(1).get<std::size_t>(),
                      j.at("input").at(2).get<std::size_t>()};
        spec.classes = j.at("classes").get<std::size_t>();
        for (const auto& l : j.at("layers")) {
            spec.layers.push_back({l.at("name").get<std::string>(), parse_layer_kind(l.at("kind").get<std::string>()),
                                   l.at("kernel").get<std::size_t>(), l.at("stride").get<std::size_t>(),
                                   l.at("pad").get<std::size_t>(), l.at("out").get<std::size_t>(),
                                   l.at("batch_norm").get<bool>(), l.at("dropout").get<double>()});
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed network spec: ") + e.what());
    }
}

// ---- network ---------------------------------------------------------------

template <typename T>
const BasicTensor<T>& ForwardPass<T>::activation(std::string_view layer) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == layer) return layers[i].output;
    throw NotFoundError("no cached activation for layer '" + std::string(layer) + "'");
}

template <typename T>
BasicNetwork<T>::BasicNetwork(NetworkSpec spec) : spec_(std::move(spec)), shapes_(spec_.shapes()) {
    params_.resize(spec_.layers.size());
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const auto& l = spec_.layers[i];
        const auto& s = shapes_[i];
        auto& p = params_[i];
        switch (l.kind) {
            case LayerKind::Conv:
                p.weights = BasicTensor<T>({l.out_channels, l.kernel, l.kernel, s.in.channels});
                break;
            case LayerKind::FullyConnected:
            case LayerKind::Score:
                p.weights = BasicTensor<T>({l.out_channels, s.in.size()});
                break;
            case LayerKind::MaxPool:
                continue;
        }
        if (uses_bn(l)) {
            p.bn_scale = BasicTensor<T>({l.out_channels}, T{1});
            p.bn_shift = BasicTensor<T>({l.out_channels}, T{0});
            p.bn = BatchNormState<T>::fresh(l.out_channels);
        } else {
            p.bias = BasicTensor<T>({l.out_channels});
        }
    }
}

template <typename T>
ForwardPass<T> BasicNetwork<T>::forward(const BasicTensor<T>& images, const OpContext& ctx) {
    return run(images, ctx, params_);
}

template <typename T>
ForwardPass<T> BasicNetwork<T>::predict(const BasicTensor<T>& images) const {
    // Inference never writes BN state, so the const_cast is never exercised.
    return run(images, OpContext{false, 0}, const_cast<std::vector<LayerParameters<T>>&>(params_));
}

template <typename T>
ForwardPass<T> BasicNetwork<T>::run(const BasicTensor<T>& images, const OpContext& ctx,
                                    std::vector<LayerParameters<T>>& params) const {
    BasicTensor<T> x = as_batch(images);
    const Extent got{x.dim(1), x.dim(2), x.dim(3)};
    if (got != spec_.input) {
        throw ShapeError("network input must be " + to_string(spec_.input) + ", got " + to_string(got));
    }
    check_finite(x, "network input");
    const std::size_t batch = x.dim(0);
    ForwardPass<T> pass;
    pass.layers.resize(spec_.layers.size());
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const auto& l = spec_.layers[i];
        auto& p = params[i];
        auto& c = pass.layers[i];
        pass.names.push_back(l.name);
        c.input = std::move(x);
        switch (l.kind) {
            case LayerKind::MaxPool:
                c.output = maxpool(c.input, l.kernel, l.stride);
                break;
            case LayerKind::Score:
                c.output = fc(c.input, p.weights, &p.bias);
                break;
            case LayerKind::Conv:
            case LayerKind::FullyConnected: {
                c.linear = l.kind == LayerKind::Conv ? conv2d(c.input, p.weights, l.stride, l.pad)
                                                     : fc(c.input, p.weights, nullptr);
                if (uses_bn(l)) {
                    c.pre_relu = batchnorm(c.linear, p.bn_scale, p.bn_shift, p.bn, ctx, &c.bn);
                } else {
                    c.pre_relu = c.linear;
                    add_channel_bias(c.pre_relu, p.bias);
                }
                c.output = relu(c.pre_relu);
                if (l.dropout > 0.0) {
                    auto d = dropout(c.output, l.dropout, OpContext{ctx.training, mix_seed(ctx.rng_seed, i)});
                    c.output = std::move(d.output);
                    c.dropout_mask = std::move(d.mask);
                }
                break;
            }
        }
        check_finite(c.output, "activation of layer " + l.name);
        x = c.output;
    }
    pass.scores = x.reshaped({batch, spec_.classes});
    pass.probs = softmax(pass.scores);
    return pass;
}

template <typename T>
BackwardPass<T> BasicNetwork<T>::backward(const ForwardPass<T>& pass, const BasicTensor<T>& grad_scores) const {
    require_shape(grad_scores, pass.scores.shape(), "backward grad_scores");
    BackwardPass<T> out;
    const std::size_t n = spec_.layers.size();
    out.params.resize(n);
    out.outputs.resize(n);
    BasicTensor<T> grad = grad_scores;
    for (std::size_t idx = n; idx-- > 0;) {
        const auto& l = spec_.layers[idx];
        const auto& p = params_[idx];
        const auto& c = pass.layers[idx];
        out.outputs[idx] = grad.reshaped(c.output.shape());
        const BasicTensor<T>& g_out = out.outputs[idx];
        auto& g = out.params[idx];
        switch (l.kind) {
            case LayerKind::MaxPool:
                grad = maxpool_backward(c.input, g_out, l.kernel, l.stride);
                break;
            case LayerKind::Score: {
                auto fg = fc_backward(c.input, p.weights, g_out, true);
                g.weights = std::move(fg.weights);
                g.bias = std::move(fg.bias);
                grad = std::move(fg.input);
                break;
            }
            case LayerKind::Conv:
            case LayerKind::FullyConnected: {
                BasicTensor<T> g_pre = relu_backward(c.pre_relu, dropout_backward(g_out, c.dropout_mask));
                BasicTensor<T> g_lin;
                if (uses_bn(l)) {
                    auto bg = batchnorm_backward(g_pre, p.bn_scale, c.bn);
                    g.bn_scale = std::move(bg.scale);
                    g.bn_shift = std::move(bg.shift);
                    g_lin = std::move(bg.input);
                } else {
                    g.bias = channel_sum(g_pre, l.out_channels);
                    g_lin = std::move(g_pre);
                }
                if (l.kind == LayerKind::Conv) {
                    auto cg = conv2d_backward(c.input, p.weights, g_lin, l.stride, l.pad);
                    g.weights = std::move(cg.kernels);
                    grad = std::move(cg.input);
                } else {
                    auto fg = fc_backward(c.input, p.weights, g_lin, false);
                    g.weights = std::move(fg.weights);
                    grad = std::move(fg.input);
                }
                break;
            }
        }
    }
    out.input = std::move(grad);
    return out;
}

template <typename T>
std::vector<ParameterSlot<T>> BasicNetwork<T>::parameters() {
    std::vector<ParameterSlot<T>> slots;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const auto& l = spec_.layers[i];
        auto& p = params_[i];
        if (!has_weights(l.kind)) continue;
        slots.push_back({l.name + ".weights", &p.weights, true});
        if (!p.bias.empty()) slots.push_back({l.name + ".bias", &p.bias, false});
        if (!p.bn_scale.empty()) {
            slots.push_back({l.name + ".bn_scale", &p.bn_scale, false});
            slots.push_back({l.name + ".bn_shift", &p.bn_shift, false});
        }
    }
    return slots;
}

template <typename T>
std::vector<ParameterSlot<T>> BasicNetwork<T>::gradient_slots(BackwardPass<T>& grads, const BasicNetwork& like) {
    std::vector<ParameterSlot<T>> slots;
    for (std::size_t i = 0; i < like.spec_.layers.size(); ++i) {
        const auto& l = like.spec_.layers[i];
        const auto& p = like.params_[i];
        auto& g = grads.params[i];
        if (!has_weights(l.kind)) continue;
        slots.push_back({l.name + ".weights", &g.weights, true});
        if (!p.bias.empty()) slots.push_back({l.name + ".bias", &g.bias, false});
        if (!p.bn_scale.empty()) {
            slots.push_back({l.name + ".bn_scale", &g.bn_scale, false});
            slots.push_back({l.name + ".bn_shift", &g.bn_shift, false});
        }
    }
    return slots;
}

template <typename T>
std::size_t BasicNetwork<T>::parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : params_) total += p.weights.size() + p.bias.size() + p.bn_scale.size() + p.bn_shift.size();
    return total;
}

template <typename T>
template <typename U>
BasicNetwork<U> BasicNetwork<T>::converted() const {
    BasicNetwork<U> out(spec_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& s = params_[i];
        auto& d = out.layers()[i];
        auto conv = [](const BasicTensor<T>& t) { return t.empty() ? BasicTensor<U>() : t.template cast<U>(); };
        d.weights = conv(s.weights);
        d.bias = conv(s.bias);
        d.bn_scale = conv(s.bn_scale);
        d.bn_shift = conv(s.bn_shift);
        d.bn.running_mean = conv(s.bn.running_mean);
        d.bn.running_var = conv(s.bn.running_var);
    }
    return out;
}

template <typename T>
void xavier_init(BasicNetwork<T>& network, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto& spec = network.spec();
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        auto& p = network.layers()[i];
        if (!has_weights(l.kind)) continue;
        const auto& s = network.shapes()[i];
        std::size_t fan_in = 0, fan_out = 0;
        if (l.kind == LayerKind::Conv) {
            fan_in = l.kernel * l.kernel * s.in.channels;
            fan_out = l.kernel * l.kernel * l.out_channels;
        } else {
            fan_in = s.in.size();
            fan_out = l.out_channels;
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (auto& w : p.weights.data()) w = static_cast<T>(dist(rng));
        if (!p.bias.empty()) p.bias.fill(T{0});
        if (!p.bn_scale.empty()) {
            p.bn_scale.fill(T{1});
            p.bn_shift.fill(T{0});
            p.bn = BatchNormState<T>::fresh(l.out_channels);
        }
    }
}

template struct ForwardPass<float>;
template struct ForwardPass<double>;
template class BasicNetwork<float>;
template class BasicNetwork<double>;
template BasicNetwork<double> BasicNetwork<float>::converted<double>() const;
template BasicNetwork<float> BasicNetwork<double>::converted<float>() const;
template BasicNetwork<float> BasicNetwork<float>::converted<float>() const;
template void xavier_init(BasicNetwork<float>&, std::uint64_t);
template void xavier_init(BasicNetwork<double>&, std::uint64_t);

}  // namespace deadnet
