#include "ppgsqa/parameter_store.hpp"

#include <algorithm>
#include <numeric>

#include "ppgsqa/errors.hpp"

namespace ppgsqa {

std::size_t shape_numel(const ParamShape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const ParamShape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
std::size_t ParameterStore<T>::add(std::string name, ParamShape shape) {
  if (index_.contains(name)) fail(ErrorKind::InvalidConfig, "duplicate parameter name '" + name + "'");
  const std::size_t n = shape_numel(shape);
  index_.emplace(name, params_.size());
  params_.push_back(Parameter<T>{std::move(name), std::move(shape), std::vector<T>(n, T(0)), std::vector<T>(n, T(0))});
  return params_.size() - 1;
}

template <typename T>
std::size_t ParameterStore<T>::add_buffer(std::string name, ParamShape shape, T fill) {
  const std::size_t n = shape_numel(shape);
  buffers_.push_back(Buffer<T>{std::move(name), std::move(shape), std::vector<T>(n, fill)});
  return buffers_.size() - 1;
}

template <typename T>
Parameter<T>& ParameterStore<T>::param(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::InvalidConfig, "no parameter named '" + name + "'");
  return params_[it->second];
}

template <typename T>
const Parameter<T>& ParameterStore<T>::param(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::InvalidConfig, "no parameter named '" + name + "'");
  return params_[it->second];
}

template <typename T>
std::vector<std::string> ParameterStore<T>::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

template <typename T>
std::size_t ParameterStore<T>::total_params() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
std::size_t ParameterStore<T>::total_buffer_values() const {
  std::size_t n = 0;
  for (const auto& b : buffers_) n += b.value.size();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace ppgsqa
