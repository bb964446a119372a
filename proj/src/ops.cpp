#include "deadnet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace deadnet {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
    std::size_t batch, in_h, in_w, in_c;
    std::size_t out_c, kernel, stride, pad;
    std::size_t out_h, out_w;

    std::size_t patch() const { return kernel * kernel * in_c; }
    std::size_t positions() const { return out_h * out_w; }
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& kernels, std::size_t stride,
                           std::size_t pad) {
    if (input.rank() != 4) throw ShapeError("conv2d: input must be n x h x w x c, got " + shape_string(input.shape()));
    if (kernels.rank() != 4 || kernels.dim(1) != kernels.dim(2)) {
        throw ShapeError("conv2d: kernels must be out x k x k x in, got " + shape_string(kernels.shape()));
    }
    if (kernels.dim(3) != input.dim(3)) {
        throw ShapeError("conv2d: kernel channels " + std::to_string(kernels.dim(3)) + " != input channels " +
                         std::to_string(input.dim(3)));
    }
    if (stride == 0) throw ShapeError("conv2d: stride must be positive");
    ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernels.dim(0), kernels.dim(1),
                   stride, pad, 0, 0};
    g.out_h = conv_output_extent(g.in_h, g.kernel, stride, pad);
    g.out_w = conv_output_extent(g.in_w, g.kernel, stride, pad);
    return g;
}

// Lays out the receptive fields of one batch item as rows of a
// (out_h*out_w) x (k*k*c) matrix; zero padding outside the image.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
    const std::size_t patch = g.patch();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            T* row = cols + (oy * g.out_w + ox) * patch;
            for (std::size_t ky = 0; ky < g.kernel; ++ky) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                T* dst = row + ky * g.kernel * g.in_c;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) {
                    std::fill(dst, dst + g.kernel * g.in_c, T{0});
                    continue;
                }
                const auto ix0 = static_cast<std::ptrdiff_t>(ox * g.stride) - static_cast<std::ptrdiff_t>(g.pad);
                if (ix0 >= 0 && ix0 + static_cast<std::ptrdiff_t>(g.kernel) <= static_cast<std::ptrdiff_t>(g.in_w)) {
                    // whole kernel row inside the image: one contiguous run
                    const T* s = image + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix0)) * g.in_c;
                    std::copy(s, s + g.kernel * g.in_c, dst);
                    continue;
                }
                for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                    const auto ix =
                        static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                    T* d = dst + kx * g.in_c;
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) {
                        std::fill(d, d + g.in_c, T{0});
                    } else {
                        const T* s = image + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c;
                        std::copy(s, s + g.in_c, d);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_accumulate(const T* cols, const ConvGeometry& g, T* image) {
    const std::size_t patch = g.patch();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const T* row = cols + (oy * g.out_w + ox) * patch;
            for (std::size_t ky = 0; ky < g.kernel; ++ky) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                    const auto ix =
                        static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                    const T* s = row + (ky * g.kernel + kx) * g.in_c;
                    T* d = image + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c;
                    for (std::size_t c = 0; c < g.in_c; ++c) d[c] += s[c];
                }
            }
        }
    }
}

void require_batched(std::size_t rank, const char* op) {
    if (rank != 4) throw ShapeError(std::string(op) + ": expected an n x h x w x c tensor");
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
    if (stride == 0) throw ShapeError("stride must be positive");
    const std::size_t padded = in + 2 * pad;
    if (padded < kernel) {
        throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded extent " + std::to_string(padded));
    }
    return (padded - kernel) / stride + 1;
}

std::size_t pool_output_extent(std::size_t in, std::size_t window, std::size_t stride) {
    if (window == 0 || stride == 0) throw ShapeError("pool window and stride must be positive");
    if (window > in) {
        throw ShapeError("pool window " + std::to_string(window) + " larger than input extent " + std::to_string(in));
    }
    return (in - window) / stride + 1;
}

// ---- conv2d ----------------------------------------------------------------

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, std::size_t stride,
                      std::size_t pad) {
    const auto g = conv_geometry(input, kernels, stride, pad);
    BasicTensor<T> output({g.batch, g.out_h, g.out_w, g.out_c});
    std::vector<T> cols(g.positions() * g.patch());
    const ConstMatrixMap<T> weights(kernels.data().data(), g.out_c, g.patch());
    const std::size_t in_item = g.in_h * g.in_w * g.in_c;
    const std::size_t out_item = g.positions() * g.out_c;
    for (std::size_t n = 0; n < g.batch; ++n) {
        im2col(input.data().data() + n * in_item, g, cols.data());
        const ConstMatrixMap<T> col_mat(cols.data(), g.positions(), g.patch());
        MatrixMap<T> out(output.data().data() + n * out_item, g.positions(), g.out_c);
        out.noalias() = col_mat * weights.transpose();
    }
    return output;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                               const BasicTensor<T>& grad_output, std::size_t stride, std::size_t pad) {
    const auto g = conv_geometry(input, kernels, stride, pad);
    require_shape(grad_output, {g.batch, g.out_h, g.out_w, g.out_c}, "conv2d_backward grad_output");
    Conv2dGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernels.shape())};
    std::vector<T> cols(g.positions() * g.patch());
    const ConstMatrixMap<T> weights(kernels.data().data(), g.out_c, g.patch());
    MatrixMap<T> grad_weights(grads.kernels.data().data(), g.out_c, g.patch());
    const std::size_t in_item = g.in_h * g.in_w * g.in_c;
    const std::size_t out_item = g.positions() * g.out_c;
    for (std::size_t n = 0; n < g.batch; ++n) {
        im2col(input.data().data() + n * in_item, g, cols.data());
        const ConstMatrixMap<T> dout(grad_output.data().data() + n * out_item, g.positions(), g.out_c);
        {
            const ConstMatrixMap<T> col_mat(cols.data(), g.positions(), g.patch());
            grad_weights.noalias() += dout.transpose() * col_mat;
        }
        MatrixMap<T> dcol(cols.data(), g.positions(), g.patch());
        dcol.noalias() = dout * weights;
        col2im_accumulate(cols.data(), g, grads.input.data().data() + n * in_item);
    }
    return grads;
}

// ---- maxpool ---------------------------------------------------------------

template <typename T>
BasicTensor<T> maxpool(const BasicTensor<T>& input, std::size_t window, std::size_t stride) {
    require_batched(input.rank(), "maxpool");
    const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
    const std::size_t oh = pool_output_extent(h, window, stride), ow = pool_output_extent(w, window, stride);
    BasicTensor<T> out({n, oh, ow, c});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    T best = -std::numeric_limits<T>::infinity();
                    for (std::size_t ky = 0; ky < window; ++ky)
                        for (std::size_t kx = 0; kx < window; ++kx)
                            best = std::max(best, input.at(b, oy * stride + ky, ox * stride + kx, ch));
                    out.at(b, oy, ox, ch) = best;
                }
    return out;
}

template <typename T>
BasicTensor<T> maxpool_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output,
                                std::size_t window, std::size_t stride) {
    require_batched(input.rank(), "maxpool_backward");
    const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
    const std::size_t oh = pool_output_extent(h, window, stride), ow = pool_output_extent(w, window, stride);
    require_shape(grad_output, {n, oh, ow, c}, "maxpool_backward grad_output");
    BasicTensor<T> grad(input.shape());
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    std::size_t by = oy * stride, bx = ox * stride;
                    T best = input.at(b, by, bx, ch);
                    for (std::size_t ky = 0; ky < window; ++ky)
                        for (std::size_t kx = 0; kx < window; ++kx) {
                            const T v = input.at(b, oy * stride + ky, ox * stride + kx, ch);
                            if (v > best) {
                                best = v;
                                by = oy * stride + ky;
                                bx = ox * stride + kx;
                            }
                        }
                    grad.at(b, by, bx, ch) += grad_output.at(b, oy, ox, ch);
                }
    return grad;
}

// ---- batchnorm -------------------------------------------------------------

template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, const BasicTensor<T>& scale, const BasicTensor<T>& shift,
                         BatchNormState<T>& state, const OpContext& ctx, BatchNormCache<T>* cache) {
    if (input.rank() < 2) throw ShapeError("batchnorm: input needs a batch and a channel axis");
    const std::size_t channels = input.shape().back();
    require_shape(scale, {channels}, "batchnorm scale");
    require_shape(shift, {channels}, "batchnorm shift");
    require_shape(state.running_mean, {channels}, "batchnorm running mean");
    require_shape(state.running_var, {channels}, "batchnorm running variance");
    const std::size_t rows = input.size() / channels;
    if (ctx.training && input.dim(0) < 2) throw ShapeError("batchnorm: training mode needs a batch of at least 2");

    std::vector<double> mean(channels, 0.0), var(channels, 0.0);
    if (ctx.training) {
        const auto x = input.data();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t ch = 0; ch < channels; ++ch) mean[ch] += x[r * channels + ch];
        for (auto& m : mean) m /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t ch = 0; ch < channels; ++ch) {
                const double d = x[r * channels + ch] - mean[ch];
                var[ch] += d * d;
            }
        for (auto& v : var) v /= static_cast<double>(rows);
        const double unbias = rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1) : 1.0;
        for (std::size_t ch = 0; ch < channels; ++ch) {
            state.running_mean[ch] = static_cast<T>(kBatchNormMomentum * state.running_mean[ch] +
                                                    (1.0 - kBatchNormMomentum) * mean[ch]);
            state.running_var[ch] = static_cast<T>(kBatchNormMomentum * state.running_var[ch] +
                                                   (1.0 - kBatchNormMomentum) * var[ch] * unbias);
        }
    } else {
        for (std::size_t ch = 0; ch < channels; ++ch) {
            mean[ch] = state.running_mean[ch];
            var[ch] = state.running_var[ch];
        }
    }

    std::vector<T> inv_std(channels);
    for (std::size_t ch = 0; ch < channels; ++ch) inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var[ch] + kBatchNormEpsilon));

    BasicTensor<T> normalized(input.shape());
    BasicTensor<T> output(input.shape());
    const auto x = input.data();
    auto xh = normalized.data();
    auto y = output.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t ch = 0; ch < channels; ++ch) {
            const std::size_t i = r * channels + ch;
            xh[i] = static_cast<T>((x[i] - mean[ch]) * inv_std[ch]);
            y[i] = scale[ch] * xh[i] + shift[ch];
        }
    if (cache) {
        cache->training = ctx.training;
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return output;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>& grad_output, const BasicTensor<T>& scale,
                                     const BatchNormCache<T>& cache) {
    require_shape(grad_output, cache.normalized.shape(), "batchnorm_backward grad_output");
    const std::size_t channels = scale.size();
    const std::size_t rows = grad_output.size() / channels;
    BatchNormGrads<T> g{BasicTensor<T>(grad_output.shape()), BasicTensor<T>({channels}),
                        BasicTensor<T>({channels})};
    const auto dy = grad_output.data();
    const auto xh = cache.normalized.data();
    std::vector<double> sum_dy(channels, 0.0), sum_dy_xh(channels, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t ch = 0; ch < channels; ++ch) {
            const std::size_t i = r * channels + ch;
            sum_dy[ch] += dy[i];
            sum_dy_xh[ch] += static_cast<double>(dy[i]) * xh[i];
        }
    for (std::size_t ch = 0; ch < channels; ++ch) {
        g.shift[ch] = static_cast<T>(sum_dy[ch]);
        g.scale[ch] = static_cast<T>(sum_dy_xh[ch]);
    }
    auto dx = g.input.data();
    const double m = static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t ch = 0; ch < channels; ++ch) {
            const std::size_t i = r * channels + ch;
            const double k = static_cast<double>(scale[ch]) * cache.inv_std[ch];
            if (cache.training) {
                dx[i] = static_cast<T>(k * (dy[i] - sum_dy[ch] / m - xh[i] * sum_dy_xh[ch] / m));
            } else {
                dx[i] = static_cast<T>(k * dy[i]);
            }
        }
    return g;
}

// ---- relu ------------------------------------------------------------------

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
    BasicTensor<T> out = input;
    for (auto& v : out.data()) v = v > T{0} ? v : T{0};
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output) {
    require_shape(grad_output, input.shape(), "relu_backward grad_output");
    BasicTensor<T> out(input.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = input[i] > T{0} ? grad_output[i] : T{0};
    return out;
}

// ---- dropout ---------------------------------------------------------------

template <typename T>
DropoutResult<T> dropout(const BasicTensor<T>& input, double ratio, const OpContext& ctx) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw Error("dropout: ratio must lie in [0, 1)");
    if (!ctx.training || ratio == 0.0) return {input, {}};
    std::mt19937_64 rng(ctx.rng_seed);
    std::bernoulli_distribution keep(1.0 - ratio);
    const T survivor = static_cast<T>(1.0 / (1.0 - ratio));
    DropoutResult<T> r{BasicTensor<T>(input.shape()), BasicTensor<T>(input.shape())};
    for (std::size_t i = 0; i < input.size(); ++i) {
        r.mask[i] = keep(rng) ? survivor : T{0};
        r.output[i] = input[i] * r.mask[i];
    }
    return r;
}

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& grad_output, const BasicTensor<T>& mask) {
    if (mask.empty()) return grad_output;
    require_shape(mask, grad_output.shape(), "dropout_backward mask");
    BasicTensor<T> out(grad_output.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = grad_output[i] * mask[i];
    return out;
}

// ---- fully connected -------------------------------------------------------

template <typename T>
BasicTensor<T> fc(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                  const std::type_identity_t<BasicTensor<T>>* bias) {
    if (input.rank() < 1 || weights.rank() != 2) throw ShapeError("fc: weights must be out x in");
    const std::size_t batch = input.rank() == 1 ? 1 : input.dim(0);
    const std::size_t in = input.size() / batch;
    const std::size_t out = weights.dim(0);
    if (weights.dim(1) != in) {
        throw ShapeError("fc: weight inner extent " + std::to_string(weights.dim(1)) + " != flattened input " +
                         std::to_string(in));
    }
    if (bias && !bias->empty()) require_shape(*bias, {out}, "fc bias");
    BasicTensor<T> output({batch, out});
    const ConstMatrixMap<T> x(input.data().data(), batch, in);
    const ConstMatrixMap<T> w(weights.data().data(), out, in);
    MatrixMap<T> y(output.data().data(), batch, out);
    y.noalias() = x * w.transpose();
    if (bias && !bias->empty()) {
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out; ++o) y(b, o) += (*bias)[o];
    }
    return output;
}

template <typename T>
FcGrads<T> fc_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                       const BasicTensor<T>& grad_output, bool has_bias) {
    const std::size_t batch = input.rank() == 1 ? 1 : input.dim(0);
    const std::size_t in = input.size() / batch;
    const std::size_t out = weights.dim(0);
    require_shape(grad_output, {batch, out}, "fc_backward grad_output");
    FcGrads<T> g{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()), {}};
    const ConstMatrixMap<T> x(input.data().data(), batch, in);
    const ConstMatrixMap<T> w(weights.data().data(), out, in);
    const ConstMatrixMap<T> dy(grad_output.data().data(), batch, out);
    MatrixMap<T>(g.input.data().data(), batch, in).noalias() = dy * w;
    MatrixMap<T>(g.weights.data().data(), out, in).noalias() = dy.transpose() * x;
    if (has_bias) {
        g.bias = BasicTensor<T>({out});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out; ++o) g.bias[o] += dy(b, o);
    }
    return g;
}

// ---- softmax ---------------------------------------------------------------

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
    const std::size_t k = logits.shape().back();
    const std::size_t rows = logits.size() / k;
    BasicTensor<T> probs(logits.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* z = logits.data().data() + r * k;
        T* p = probs.data().data() + r * k;
        const double mx = *std::max_element(z, z + k);
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) total += std::exp(static_cast<double>(z[j]) - mx);
        for (std::size_t j = 0; j < k; ++j) p[j] = static_cast<T>(std::exp(static_cast<double>(z[j]) - mx) / total);
    }
    return probs;
}

template <typename T>
SoftmaxXent<T> softmax_xent(const BasicTensor<T>& logits, std::span<const int> labels) {
    const std::size_t k = logits.shape().back();
    const std::size_t rows = logits.size() / k;
    if (labels.size() != rows) throw ShapeError("softmax_xent: one label per logit row required");
    if (k < 2) throw ShapeError("softmax_xent: need at least two classes");
    SoftmaxXent<T> r;
    r.probs = softmax(logits);
    r.grad_logits = BasicTensor<T>(logits.shape());
    for (std::size_t row = 0; row < rows; ++row) {
        const int label = labels[row];
        if (label < 0 || static_cast<std::size_t>(label) >= k) {
            throw Error("softmax_xent: label " + std::to_string(label) + " out of range");
        }
        const T* z = logits.data().data() + row * k;
        const double mx = *std::max_element(z, z + k);
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) total += std::exp(static_cast<double>(z[j]) - mx);
        // log-sum-exp form keeps tiny losses exact instead of rounding p to 1
        r.loss += std::log(total) - (static_cast<double>(z[label]) - mx);
        for (std::size_t j = 0; j < k; ++j) {
            const double onehot = static_cast<std::size_t>(label) == j ? 1.0 : 0.0;
            r.grad_logits[row * k + j] = static_cast<T>((r.probs[row * k + j] - onehot) / static_cast<double>(rows));
        }
    }
    r.loss /= static_cast<double>(rows);
    return r;
}

#define DEADNET_INSTANTIATE_OPS(T)                                                                             \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t, std::size_t);   \
    template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,                      \
                                            const BasicTensor<T>&, std::size_t, std::size_t);                  \
    template BasicTensor<T> maxpool(const BasicTensor<T>&, std::size_t, std::size_t);                         \
    template BasicTensor<T> maxpool_backward(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t,       \
                                             std::size_t);                                                    \
    template BasicTensor<T> batchnorm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
                                      BatchNormState<T>&, const OpContext&, BatchNormCache<T>*);              \
    template BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                                  const BatchNormCache<T>&);                                  \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                      \
    template DropoutResult<T> dropout(const BasicTensor<T>&, double, const OpContext&);                       \
    template BasicTensor<T> dropout_backward(const BasicTensor<T>&, const BasicTensor<T>&);                   \
    template BasicTensor<T> fc(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>*);          \
    template FcGrads<T> fc_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, bool); \
    template BasicTensor<T> softmax(const BasicTensor<T>&);                                                   \
    template SoftmaxXent<T> softmax_xent(const BasicTensor<T>&, std::span<const int>);

DEADNET_INSTANTIATE_OPS(float)
DEADNET_INSTANTIATE_OPS(double)

}  // namespace deadnet
