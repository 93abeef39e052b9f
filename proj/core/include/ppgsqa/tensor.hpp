#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ppgsqa/errors.hpp"

namespace ppgsqa {

struct Shape3 {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t length = 0;

  std::size_t numel() const { return batch * channels * length; }
  bool operator==(const Shape3&) const = default;
  std::string to_string() const {
    return "[" + std::to_string(batch) + "," + std::to_string(channels) + "," + std::to_string(length) + "]";
  }
};

/// Dense row-major (batch, channels, length) array.
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Shape3 shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor3(std::size_t b, std::size_t c, std::size_t l, T fill = T(0)) : Tensor3(Shape3{b, c, l}, fill) {}
  Tensor3(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) fail(ErrorKind::ShapeMismatch, "tensor data does not match " + shape_.to_string());
  }

  const Shape3& shape() const { return shape_; }
  std::size_t batch() const { return shape_.batch; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t length() const { return shape_.length; }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator()(std::size_t b, std::size_t c, std::size_t l) {
    return data_[(b * shape_.channels + c) * shape_.length + l];
  }
  T operator()(std::size_t b, std::size_t c, std::size_t l) const {
    return data_[(b * shape_.channels + c) * shape_.length + l];
  }

  std::span<T> row(std::size_t b, std::size_t c) {
    return std::span<T>(data_).subspan((b * shape_.channels + c) * shape_.length, shape_.length);
  }
  std::span<const T> row(std::size_t b, std::size_t c) const {
    return std::span<const T>(data_).subspan((b * shape_.channels + c) * shape_.length, shape_.length);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  Tensor3<U> cast() const {
    return Tensor3<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

 private:
  Shape3 shape_{};
  std::vector<T> data_;
};

template <typename T>
void require_finite(const Tensor3<T>& t, const std::string& where) {
  if (!t.all_finite()) fail(ErrorKind::NonFinite, "non-finite value after " + where);
}

}  // namespace ppgsqa
