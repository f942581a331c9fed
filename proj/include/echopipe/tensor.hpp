#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "echopipe/error.hpp"

namespace echopipe {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major n-dimensional array with value semantics.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw Error("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                  shape_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <typename... Idx>
  T& at(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx>
  const T& at(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  /// Number of elements spanned by one step along `axis`.
  std::size_t stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t i = axis + 1; i < shape_.size(); ++i) s *= shape_[i];
    return s;
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
      throw Error("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  /// Copy of the sub-tensor at index `i` of the leading axis.
  Tensor slice0(std::size_t i) const {
    Shape sub(shape_.begin() + 1, shape_.end());
    const std::size_t n = shape_numel(sub);
    std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(i * n),
                       data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    return Tensor(std::move(sub), std::move(out));
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) off = off * shape_[axis++] + i;
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace echopipe
