#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ppgsqa/rng.hpp"
#include "ppgsqa/tensor.hpp"

// Stateless forward/backward kernels for every layer kind in the network.
// Backward kernels accumulate (+=) into parameter gradient spans and return
// the gradient with respect to the layer input.

namespace ppgsqa {

struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t weight_size() const { return out_channels * in_channels * kernel; }
};

/// floor((L + 2p - k) / s) + 1; throws ShapeMismatch when the window does not fit.
std::size_t pooled_length(std::size_t length, std::size_t kernel, std::size_t stride, std::size_t padding);

template <typename T>
Tensor3<T> conv1d_forward(const Tensor3<T>& x, std::span<const T> weight, const ConvGeometry& g,
                          std::span<const T> bias = {});

template <typename T>
Tensor3<T> conv1d_backward(const Tensor3<T>& x, std::span<const T> weight, const ConvGeometry& g,
                           const Tensor3<T>& dy, std::span<T> dweight, std::span<T> dbias = {},
                           bool need_input_grad = true);

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormCache {
  std::vector<T> xhat;
  std::vector<T> inv_std;
};

/// Training mode normalizes with batch statistics over (B, L), stores the
/// cache and updates running stats (unbiased variance). Eval mode uses the
/// running stats and leaves them untouched.
template <typename T>
Tensor3<T> batchnorm1d_forward(const Tensor3<T>& x, std::span<const T> gamma, std::span<const T> beta,
                               std::span<T> running_mean, std::span<T> running_var, bool training,
                               BatchNormCache<T>* cache, double momentum = kBatchNormMomentum,
                               double eps = kBatchNormEps);

template <typename T>
Tensor3<T> batchnorm1d_backward(const Tensor3<T>& dy, std::span<const T> gamma, const BatchNormCache<T>& cache,
                                std::span<T> dgamma, std::span<T> dbeta);

template <typename T>
Tensor3<T> relu_forward(const Tensor3<T>& x);

// Takes the forward output; ReLU'(0) is taken as 0.
template <typename T>
Tensor3<T> relu_backward(const Tensor3<T>& y, const Tensor3<T>& dy);

template <typename T>
Tensor3<T> maxpool1d_forward(const Tensor3<T>& x, std::size_t kernel, std::size_t stride, std::size_t padding,
                             std::vector<std::uint32_t>* argmax);

template <typename T>
Tensor3<T> maxpool1d_backward(const Shape3& input_shape, const Tensor3<T>& dy, const std::vector<std::uint32_t>& argmax);

/// Inverted dropout. In training mode `mask` receives the per-element scale
/// (0 or 1/(1-p)); in eval mode or with p == 0 the input is returned as is.
template <typename T>
Tensor3<T> dropout_forward(const Tensor3<T>& x, double p, Rng* rng, bool training, std::vector<T>* mask);

template <typename T>
Tensor3<T> dropout_backward(const Tensor3<T>& dy, const std::vector<T>& mask);

// [B, C, L] -> [B, C, 1]
template <typename T>
Tensor3<T> global_avgpool_forward(const Tensor3<T>& x);

template <typename T>
Tensor3<T> global_avgpool_backward(const Shape3& input_shape, const Tensor3<T>& dy);

/// Fully connected layer on [B, in, 1] tensors; weight is [out x in].
template <typename T>
Tensor3<T> linear_forward(const Tensor3<T>& x, std::span<const T> weight, std::size_t out_features,
                          std::span<const T> bias = {});

template <typename T>
Tensor3<T> linear_backward(const Tensor3<T>& x, std::span<const T> weight, std::size_t out_features,
                           const Tensor3<T>& dy, std::span<T> dweight, std::span<T> dbias = {});

template <typename T>
struct SECache {
  std::vector<T> pooled;  // [B x C]
  std::vector<T> hidden;  // [B x C/r], pre-activation
  std::vector<T> scale;   // [B x C]
};

/// Squeeze-and-excitation: s = sigmoid(fc2 * relu(fc1 * mean_l(x))), y = x * s.
/// Both fully connected layers are bias-free; fc1 is [h x C], fc2 is [C x h].
template <typename T>
Tensor3<T> se_forward(const Tensor3<T>& x, std::span<const T> fc1, std::span<const T> fc2, std::size_t hidden,
                      SECache<T>* cache);

template <typename T>
Tensor3<T> se_backward(const Tensor3<T>& x, std::span<const T> fc1, std::span<const T> fc2, std::size_t hidden,
                       const SECache<T>& cache, const Tensor3<T>& dy, std::span<T> dfc1, std::span<T> dfc2);

template <typename T>
Tensor3<T> add(const Tensor3<T>& a, const Tensor3<T>& b);

}  // namespace ppgsqa
