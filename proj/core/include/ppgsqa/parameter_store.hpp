#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ppgsqa/errors.hpp"

namespace ppgsqa {

using ParamShape = std::vector<std::size_t>;

std::size_t shape_numel(const ParamShape& shape);
std::string shape_to_string(const ParamShape& shape);

template <typename T>
struct Parameter {
  std::string name;
  ParamShape shape;
  std::vector<T> value;
  std::vector<T> grad;
};

// Non-learnable state (BN running statistics).
template <typename T>
struct Buffer {
  std::string name;
  ParamShape shape;
  std::vector<T> value;
};

/// Ordered, named storage for every learnable array and BN running statistic
/// of a model. Registration order is the iteration order; indices returned by
/// add() stay valid for the store's lifetime.
template <typename T>
class ParameterStore {
 public:
  std::size_t add(std::string name, ParamShape shape);
  std::size_t add_buffer(std::string name, ParamShape shape, T fill);

  Parameter<T>& param(std::size_t i) { return params_[i]; }
  const Parameter<T>& param(std::size_t i) const { return params_[i]; }
  Parameter<T>& param(const std::string& name);
  const Parameter<T>& param(const std::string& name) const;
  Buffer<T>& buffer(std::size_t i) { return buffers_[i]; }
  const Buffer<T>& buffer(std::size_t i) const { return buffers_[i]; }

  std::vector<Parameter<T>>& params() { return params_; }
  const std::vector<Parameter<T>>& params() const { return params_; }
  std::vector<Buffer<T>>& buffers() { return buffers_; }
  const std::vector<Buffer<T>>& buffers() const { return buffers_; }

  std::vector<std::string> names() const;
  std::size_t total_params() const;
  std::size_t total_buffer_values() const;

  void zero_grad();

  bool training() const { return training_; }
  void set_training(bool on) { training_ = on; }

  template <typename U>
  void copy_values_from(const ParameterStore<U>& other);

 private:
  std::vector<Parameter<T>> params_;
  std::vector<Buffer<T>> buffers_;
  std::map<std::string, std::size_t> index_;
  bool training_ = true;
};

template <typename T>
template <typename U>
void ParameterStore<T>::copy_values_from(const ParameterStore<U>& other) {
  if (other.params().size() != params_.size() || other.buffers().size() != buffers_.size()) {
    fail(ErrorKind::ShapeMismatch, "parameter stores differ in layout");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& src = other.params()[i];
    if (src.name != params_[i].name || src.shape != params_[i].shape) {
      fail(ErrorKind::ShapeMismatch, "parameter '" + src.name + "' does not match '" + params_[i].name + "'");
    }
    params_[i].value.assign(src.value.begin(), src.value.end());
  }
  for (std::size_t i = 0; i < buffers_.size(); ++i) {
    const auto& src = other.buffers()[i];
    if (src.name != buffers_[i].name || src.shape != buffers_[i].shape) {
      fail(ErrorKind::ShapeMismatch, "buffer '" + src.name + "' does not match '" + buffers_[i].name + "'");
    }
    buffers_[i].value.assign(src.value.begin(), src.value.end());
  }
}

}  // namespace ppgsqa
