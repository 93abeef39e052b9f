#include "ppgsqa/model.hpp"

#include <cmath>

#include "ppgsqa/errors.hpp"

namespace ppgsqa {

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::InvalidConfig, what); };
  if (in_channels < 1 || in_channels > 4) bad("in_channels must be between 1 and 4");
  if (stage_filters.empty() || stage_filters.size() != blocks_per_stage.size()) {
    bad("stage_filters and blocks_per_stage must be non-empty and of equal length");
  }
  if (stage_filters.front() != stem_filters) bad("first stage width must equal the stem width");
  for (std::size_t n : blocks_per_stage) {
    if (n == 0) bad("every stage needs at least one block");
  }
  if (reduction_ratio == 0) bad("reduction ratio must be positive");
  if (use_se) {
    for (std::size_t f : stage_filters) {
      if (f % reduction_ratio != 0) bad("reduction ratio must divide every stage width");
    }
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) bad("dropout probability must lie in [0, 1)");
  if (num_classes < 2) bad("need at least two classes");
  if (segment_len == 0) bad("segment length must be positive");
  if (block_kernel % 2 == 0) bad("block kernel must be odd");
}

namespace {

enum class InitKind { HeUniform, One, Zero };

}  // namespace

template <typename T>
detail::ConvBn<T> Model<T>::make_conv_bn(const std::string& prefix, const std::string& conv_name,
                                         const std::string& bn_name, ConvGeometry geom) {
  detail::ConvBn<T> layer;
  layer.geom = geom;
  layer.weight = store_.add(prefix + conv_name + ".weight", {geom.out_channels, geom.in_channels, geom.kernel});
  layer.gamma = store_.add(prefix + bn_name + ".weight", {geom.out_channels});
  layer.beta = store_.add(prefix + bn_name + ".bias", {geom.out_channels});
  layer.running_mean = store_.add_buffer(prefix + bn_name + ".running_mean", {geom.out_channels}, T(0));
  layer.running_var = store_.add_buffer(prefix + bn_name + ".running_var", {geom.out_channels}, T(1));
  return layer;
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  stem_ = make_conv_bn("stem.", "conv", "bn",
                       {cfg_.in_channels, cfg_.stem_filters, cfg_.stem_kernel, cfg_.stem_stride, cfg_.stem_padding});

  std::size_t channels = cfg_.stem_filters;
  const std::size_t pad = cfg_.block_kernel / 2;
  for (std::size_t s = 0; s < cfg_.stage_filters.size(); ++s) {
    const std::size_t width = cfg_.stage_filters[s];
    for (std::size_t i = 0; i < cfg_.blocks_per_stage[s]; ++i) {
      const std::size_t stride = i == 0 ? cfg_.stage_stride(s) : 1;
      detail::BasicBlock<T> block;
      block.name = "layer" + std::to_string(s + 1) + ".block" + std::to_string(i);
      const std::string prefix = block.name + ".";
      block.conv1 = make_conv_bn(prefix, "conv1", "bn1", {channels, width, cfg_.block_kernel, stride, pad});
      block.conv2 = make_conv_bn(prefix, "conv2", "bn2", {width, width, cfg_.block_kernel, 1, pad});
      if (cfg_.use_se) {
        block.use_se = true;
        block.se_hidden = width / cfg_.reduction_ratio;
        block.se_fc1 = store_.add(prefix + "se.fc1.weight", {block.se_hidden, width});
        block.se_fc2 = store_.add(prefix + "se.fc2.weight", {width, block.se_hidden});
      }
      if (stride != 1 || channels != width) {
        block.downsample = make_conv_bn(prefix + "downsample.", "conv", "bn", {channels, width, 1, stride, 0});
      }
      blocks_.push_back(std::move(block));
      channels = width;
    }
  }
  fc_weight_ = store_.add("fc.weight", {cfg_.num_classes, channels});
  fc_bias_ = store_.add("fc.bias", {cfg_.num_classes});
}

template <typename T>
void Model<T>::initialize(Rng& rng) {
  for (auto& p : store_.params()) {
    const bool is_bn = p.name.find(".bn") != std::string::npos;
    const bool is_bias = p.name.size() >= 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0;
    InitKind kind = InitKind::HeUniform;
    if (is_bn) kind = is_bias ? InitKind::Zero : InitKind::One;
    else if (is_bias) kind = InitKind::Zero;

    switch (kind) {
      case InitKind::One: std::fill(p.value.begin(), p.value.end(), T(1)); break;
      case InitKind::Zero: std::fill(p.value.begin(), p.value.end(), T(0)); break;
      case InitKind::HeUniform: {
        std::size_t fan_in = 1;
        for (std::size_t d = 1; d < p.shape.size(); ++d) fan_in *= p.shape[d];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (T& v : p.value) v = static_cast<T>(rng.uniform(-bound, bound));
        break;
      }
    }
  }
  for (auto& b : store_.buffers()) {
    const bool is_var = b.name.find("running_var") != std::string::npos;
    std::fill(b.value.begin(), b.value.end(), is_var ? T(1) : T(0));
  }
  store_.zero_grad();
  cache_valid_ = false;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor3<T> Model<T>::conv_bn_forward(detail::ConvBn<T>& layer, const Tensor3<T>& x, bool training, bool record) {
  auto c = conv1d_forward<T>(x, value(layer.weight), layer.geom);
  auto y = batchnorm1d_forward<T>(c, value(layer.gamma), value(layer.beta), store_.buffer(layer.running_mean).value,
                                  store_.buffer(layer.running_var).value, training,
                                  record ? &layer.bn_cache : nullptr);
  if (record) layer.input = x;
  return y;
}

template <typename T>
Tensor3<T> Model<T>::conv_bn_infer(const detail::ConvBn<T>& layer, const Tensor3<T>& x) const {
  auto c = conv1d_forward<T>(x, value(layer.weight), layer.geom);
  // Eval-mode batchnorm only reads the running statistics.
  auto& mean = const_cast<std::vector<T>&>(store_.buffer(layer.running_mean).value);
  auto& var = const_cast<std::vector<T>&>(store_.buffer(layer.running_var).value);
  return batchnorm1d_forward<T>(c, value(layer.gamma), value(layer.beta), mean, var, false, nullptr);
}

template <typename T>
Tensor3<T> Model<T>::conv_bn_backward(detail::ConvBn<T>& layer, const Tensor3<T>& dy, bool need_input_grad) {
  auto dconv = batchnorm1d_backward<T>(dy, value(layer.gamma), layer.bn_cache, grad(layer.gamma), grad(layer.beta));
  return conv1d_backward<T>(layer.input, value(layer.weight), layer.geom, dconv, grad(layer.weight), {},
                            need_input_grad);
}

template <typename T>
Tensor3<T> Model<T>::block_forward(detail::BasicBlock<T>& block, const Tensor3<T>& x, Rng* rng) {
  auto c1 = conv_bn_forward(block.conv1, x, true, true);
  block.relu1_out = relu_forward(c1);
  auto d1 = dropout_forward(block.relu1_out, cfg_.dropout_p, rng, true, &block.drop1_mask);
  auto c2 = conv_bn_forward(block.conv2, d1, true, true);
  auto branch = dropout_forward(c2, cfg_.dropout_p, rng, true, &block.drop2_mask);
  if (block.use_se) {
    block.pre_se = branch;
    branch = se_forward<T>(block.pre_se, value(block.se_fc1), value(block.se_fc2), block.se_hidden, &block.se_cache);
  }
  Tensor3<T> shortcut = block.downsample ? conv_bn_forward(*block.downsample, x, true, true) : x;
  block.out = relu_forward(add(branch, shortcut));
  return block.out;
}

template <typename T>
Tensor3<T> Model<T>::block_infer(const detail::BasicBlock<T>& block, const Tensor3<T>& x) const {
  auto h = relu_forward(conv_bn_infer(block.conv1, x));
  auto branch = conv_bn_infer(block.conv2, h);
  if (block.use_se) {
    branch = se_forward<T>(branch, value(block.se_fc1), value(block.se_fc2), block.se_hidden, nullptr);
  }
  if (block.downsample) return relu_forward(add(branch, conv_bn_infer(*block.downsample, x)));
  return relu_forward(add(branch, x));
}

template <typename T>
Tensor3<T> Model<T>::block_backward(detail::BasicBlock<T>& block, const Tensor3<T>& dy) {
  const auto dsum = relu_backward(block.out, dy);
  Tensor3<T> dbranch = dsum;
  if (block.use_se) {
    dbranch = se_backward<T>(block.pre_se, value(block.se_fc1), value(block.se_fc2), block.se_hidden,
                             block.se_cache, dsum, grad(block.se_fc1), grad(block.se_fc2));
  }
  auto dc2 = dropout_backward(dbranch, block.drop2_mask);
  auto dd1 = conv_bn_backward(block.conv2, dc2, true);
  auto dr1 = dropout_backward(dd1, block.drop1_mask);
  auto dc1 = relu_backward(block.relu1_out, dr1);
  auto dx = conv_bn_backward(block.conv1, dc1, true);
  if (block.downsample) return add(dx, conv_bn_backward(*block.downsample, dsum, true));
  return add(dx, dsum);
}

template <typename T>
Tensor3<T> Model<T>::forward(const Tensor3<T>& x, bool training, Rng* rng) {
  cache_valid_ = false;
  if (!training) return infer(x, &trace_);
  if (cfg_.dropout_p > 0.0 && !rng) fail(ErrorKind::InvalidMode, "training forward needs a generator for dropout");
  if (x.channels() != cfg_.in_channels) {
    fail(ErrorKind::ShapeMismatch, "input has " + std::to_string(x.channels()) + " channels, model expects " +
                                       std::to_string(cfg_.in_channels));
  }
  trace_.clear();
  trace_.push_back(x.shape());

  auto h = conv_bn_forward(stem_, x, true, true);
  trace_.push_back(h.shape());
  stem_relu_out_ = relu_forward(h);
  pool_in_shape_ = stem_relu_out_.shape();
  h = maxpool1d_forward(stem_relu_out_, cfg_.pool_kernel, cfg_.pool_stride, cfg_.pool_padding, &pool_argmax_);
  trace_.push_back(h.shape());

  std::size_t b = 0;
  for (std::size_t s = 0; s < cfg_.blocks_per_stage.size(); ++s) {
    for (std::size_t i = 0; i < cfg_.blocks_per_stage[s]; ++i, ++b) h = block_forward(blocks_[b], h, rng);
    trace_.push_back(h.shape());
  }
  gap_in_shape_ = h.shape();
  gap_out_ = global_avgpool_forward(h);
  trace_.push_back(gap_out_.shape());
  auto logits = linear_forward<T>(gap_out_, value(fc_weight_), cfg_.num_classes, value(fc_bias_));
  trace_.push_back(logits.shape());
  require_finite(logits, "model forward");
  cache_valid_ = true;
  return logits;
}

template <typename T>
Tensor3<T> Model<T>::infer(const Tensor3<T>& x, std::vector<Shape3>* trace) const {
  if (x.channels() != cfg_.in_channels) {
    fail(ErrorKind::ShapeMismatch, "input has " + std::to_string(x.channels()) + " channels, model expects " +
                                       std::to_string(cfg_.in_channels));
  }
  if (trace) {
    trace->clear();
    trace->push_back(x.shape());
  }
  auto h = conv_bn_infer(stem_, x);
  if (trace) trace->push_back(h.shape());
  h = maxpool1d_forward(relu_forward(h), cfg_.pool_kernel, cfg_.pool_stride, cfg_.pool_padding, nullptr);
  if (trace) trace->push_back(h.shape());
  std::size_t b = 0;
  for (std::size_t s = 0; s < cfg_.blocks_per_stage.size(); ++s) {
    for (std::size_t i = 0; i < cfg_.blocks_per_stage[s]; ++i, ++b) h = block_infer(blocks_[b], h);
    if (trace) trace->push_back(h.shape());
  }
  h = global_avgpool_forward(h);
  if (trace) trace->push_back(h.shape());
  auto logits = linear_forward<T>(h, value(fc_weight_), cfg_.num_classes, value(fc_bias_));
  if (trace) trace->push_back(logits.shape());
  require_finite(logits, "model inference");
  return logits;
}

template <typename T>
std::uint64_t Model<T>::activation_signature() const {
  if (!cache_valid_) fail(ErrorKind::StaleCache, "activation_signature() without a training-mode forward()");
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  auto active = [&mix](std::span<const T> values) {
    for (T v : values) mix(v > T(0) ? 1u : 0u);
  };
  active(stem_relu_out_.values());
  for (auto a : pool_argmax_) mix(a);
  for (const auto& b : blocks_) {
    active(b.relu1_out.values());
    active(b.out.values());
    if (b.use_se) active(b.se_cache.hidden);
  }
  return h;
}

template <typename T>
void Model<T>::backward(const Tensor3<T>& dlogits) {
  if (!cache_valid_) fail(ErrorKind::StaleCache, "backward() without a matching training-mode forward()");
  if (dlogits.shape() != Shape3{gap_out_.batch(), cfg_.num_classes, 1}) {
    fail(ErrorKind::ShapeMismatch, "logit gradient shape " + dlogits.shape().to_string());
  }
  cache_valid_ = false;
  store_.zero_grad();

  auto dh = linear_backward<T>(gap_out_, value(fc_weight_), cfg_.num_classes, dlogits, grad(fc_weight_), grad(fc_bias_));
  dh = global_avgpool_backward(gap_in_shape_, dh);
  for (std::size_t b = blocks_.size(); b-- > 0;) dh = block_backward(blocks_[b], dh);
  dh = maxpool1d_backward(pool_in_shape_, dh, pool_argmax_);
  dh = relu_backward(stem_relu_out_, dh);
  conv_bn_backward(stem_, dh, false);
}

template class Model<float>;
template class Model<double>;

}  // namespace ppgsqa
