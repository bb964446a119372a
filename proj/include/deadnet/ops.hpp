#pragma once

#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "deadnet/tensor.hpp"

// Differentiable building blocks of the DeadNet graph. Every forward op has a
// matching *_backward that returns the exact vector-Jacobian product for the
// incoming gradient. Batched tensors are n x h x w x c.

namespace deadnet {

struct OpContext {
    bool training = false;
    std::uint64_t rng_seed = 0;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);
std::size_t pool_output_extent(std::size_t in, std::size_t window, std::size_t stride);

// ---- conv2d ----------------------------------------------------------------
// kernels: out_channels x k x k x in_channels

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, std::size_t stride,
                      std::size_t pad);

template <typename T>
struct Conv2dGrads {
    BasicTensor<T> input;
    BasicTensor<T> kernels;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                               const BasicTensor<T>& grad_output, std::size_t stride, std::size_t pad);

// ---- maxpool ---------------------------------------------------------------

template <typename T>
BasicTensor<T> maxpool(const BasicTensor<T>& input, std::size_t window, std::size_t stride);

// Routes each output gradient to the first maximum in row-major scan order.
template <typename T>
BasicTensor<T> maxpool_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output,
                                std::size_t window, std::size_t stride);

// ---- batchnorm -------------------------------------------------------------

template <typename T>
struct BatchNormState {
    BasicTensor<T> running_mean;
    BasicTensor<T> running_var;

    static BatchNormState fresh(std::size_t channels) {
        return {BasicTensor<T>({channels}, T{0}), BasicTensor<T>({channels}, T{1})};
    }
};

template <typename T>
struct BatchNormCache {
    bool training = false;
    BasicTensor<T> normalized;  // x-hat
    std::vector<T> inv_std;     // per channel
};

// Normalizes over every axis except the last (channels). In training mode the
// batch statistics are used and `state` is updated with momentum 0.9; in
// inference mode `state` is read only.
template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, const BasicTensor<T>& scale, const BasicTensor<T>& shift,
                         BatchNormState<T>& state, const OpContext& ctx, BatchNormCache<T>* cache = nullptr);

template <typename T>
struct BatchNormGrads {
    BasicTensor<T> input;
    BasicTensor<T> scale;
    BasicTensor<T> shift;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>& grad_output, const BasicTensor<T>& scale,
                                     const BatchNormCache<T>& cache);

// ---- relu ------------------------------------------------------------------

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output);

// ---- dropout ---------------------------------------------------------------

template <typename T>
struct DropoutResult {
    BasicTensor<T> output;
    BasicTensor<T> mask;  // 0 or 1/(1-ratio); empty in inference mode
};

// Inverted dropout; the mask is a pure function of ctx.rng_seed.
template <typename T>
DropoutResult<T> dropout(const BasicTensor<T>& input, double ratio, const OpContext& ctx);

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& grad_output, const BasicTensor<T>& mask);

// ---- fully connected -------------------------------------------------------
// input: n x (anything) flattened per item; weights: out x in; bias: out or empty.

template <typename T>
BasicTensor<T> fc(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                  const std::type_identity_t<BasicTensor<T>>* bias = nullptr);

template <typename T>
struct FcGrads {
    BasicTensor<T> input;  // same shape as the forward input
    BasicTensor<T> weights;
    BasicTensor<T> bias;  // empty when there was no bias
};

template <typename T>
FcGrads<T> fc_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                       const BasicTensor<T>& grad_output, bool has_bias);

// ---- softmax cross-entropy -------------------------------------------------

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

template <typename T>
struct SoftmaxXent {
    double loss = 0.0;           // mean over the batch
    BasicTensor<T> probs;        // n x k
    BasicTensor<T> grad_logits;  // (probs - onehot) / n
};

// logits: n x k (or k for a single item).
template <typename T>
SoftmaxXent<T> softmax_xent(const BasicTensor<T>& logits, std::span<const int> labels);

template <typename T>
SoftmaxXent<T> softmax_xent(const BasicTensor<T>& logits, int label) {
    return softmax_xent(logits, std::span<const int>(&label, 1));
}

}  // namespace deadnet
