#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ppgsqa/layers.hpp"
#include "ppgsqa/parameter_store.hpp"
#include "ppgsqa/rng.hpp"
#include "ppgsqa/tensor.hpp"

namespace ppgsqa {

/// Architecture hyperparameters of the residual SE network.
struct ModelConfig {
  std::size_t in_channels = 3;
  bool use_se = true;
  std::size_t reduction_ratio = 8;
  std::size_t stem_filters = 32;
  std::vector<std::size_t> stage_filters{32, 64};
  std::vector<std::size_t> blocks_per_stage{2, 2};
  double dropout_p = 0.2;
  std::size_t num_classes = 2;
  std::size_t segment_len = 960;

  std::size_t stem_kernel = 7;
  std::size_t stem_stride = 2;
  std::size_t stem_padding = 3;
  std::size_t pool_kernel = 3;
  std::size_t pool_stride = 2;
  std::size_t pool_padding = 1;
  std::size_t block_kernel = 3;

  /// Throws InvalidConfig when the invariants do not hold.
  void validate() const;
  /// First block of every stage after the first downsamples by 2.
  std::size_t stage_stride(std::size_t stage) const { return stage == 0 ? 1 : 2; }

  bool operator==(const ModelConfig&) const = default;
};

namespace detail {

template <typename T>
struct ConvBn {
  ConvGeometry geom;
  std::size_t weight = 0, gamma = 0, beta = 0;  // parameter indices
  std::size_t running_mean = 0, running_var = 0;  // buffer indices
  Tensor3<T> input;
  BatchNormCache<T> bn_cache;
};

template <typename T>
struct BasicBlock {
  std::string name;
  ConvBn<T> conv1, conv2;
  std::optional<ConvBn<T>> downsample;
  bool use_se = false;
  std::size_t se_fc1 = 0, se_fc2 = 0, se_hidden = 0;

  // Forward caches, training mode only.
  Tensor3<T> relu1_out, pre_se, shortcut_in, out;
  std::vector<T> drop1_mask, drop2_mask;
  SECache<T> se_cache;
};

}  // namespace detail

/// The fixed-topology network:
///   stem conv(k7,s2,p3) -> BN -> ReLU -> maxpool(k3,s2,p1)
///   -> stages of BasicBlock1D (conv-BN-ReLU-Dropout-conv-BN-Dropout-[SE]-add-ReLU)
///   -> global average pool -> linear head.
/// Convolutions and SE layers are bias-free; the head has a bias.
template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore<T>& store() { return store_; }
  const ParameterStore<T>& store() const { return store_; }

  /// He-uniform (fan-in) for convolution and linear weights, gamma = 1,
  /// beta = 0, zero head bias, running stats (0, 1). Parameters are drawn in
  /// store order.
  void initialize(Rng& rng);

  /// Training mode caches activations and dropout masks for backward() and
  /// updates BN running statistics. Eval mode is side-effect free apart from
  /// invalidating the cache. Returns logits as [B, num_classes, 1].
  Tensor3<T> forward(const Tensor3<T>& x, bool training, Rng* rng = nullptr);

  /// Eval-mode inference without touching any model state.
  Tensor3<T> infer(const Tensor3<T>& x, std::vector<Shape3>* trace = nullptr) const;

  /// Zeroes every gradient buffer and fills it from d(loss)/d(logits).
  /// Throws StaleCache unless preceded by a training-mode forward().
  void backward(const Tensor3<T>& dlogits);

  const std::vector<Shape3>& last_trace() const { return trace_; }

  /// Hash of the piecewise-linear branch taken by the last training-mode
  /// forward: which ReLU units were active and which max-pool inputs won.
  /// Two inputs with equal signatures lie on the same smooth piece of the
  /// loss. Throws StaleCache without a cached forward.
  std::uint64_t activation_signature() const;

 private:
  detail::ConvBn<T> make_conv_bn(const std::string& prefix, const std::string& conv_name, const std::string& bn_name,
                                 ConvGeometry geom);
  Tensor3<T> conv_bn_forward(detail::ConvBn<T>& layer, const Tensor3<T>& x, bool training, bool record);
  Tensor3<T> conv_bn_infer(const detail::ConvBn<T>& layer, const Tensor3<T>& x) const;
  Tensor3<T> conv_bn_backward(detail::ConvBn<T>& layer, const Tensor3<T>& dy, bool need_input_grad);

  Tensor3<T> block_forward(detail::BasicBlock<T>& block, const Tensor3<T>& x, Rng* rng);
  Tensor3<T> block_infer(const detail::BasicBlock<T>& block, const Tensor3<T>& x) const;
  Tensor3<T> block_backward(detail::BasicBlock<T>& block, const Tensor3<T>& dy);

  std::span<T> value(std::size_t i) { return store_.param(i).value; }
  std::span<const T> value(std::size_t i) const { return store_.param(i).value; }
  std::span<T> grad(std::size_t i) { return store_.param(i).grad; }

  ModelConfig cfg_;
  ParameterStore<T> store_;
  detail::ConvBn<T> stem_;
  std::vector<detail::BasicBlock<T>> blocks_;
  std::size_t fc_weight_ = 0, fc_bias_ = 0;

  // Forward caches.
  bool cache_valid_ = false;
  Tensor3<T> stem_relu_out_;
  Shape3 pool_in_shape_{};
  std::vector<std::uint32_t> pool_argmax_;
  Shape3 gap_in_shape_{};
  Tensor3<T> gap_out_;
  std::vector<Shape3> trace_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace ppgsqa
