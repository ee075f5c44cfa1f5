// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lbscan/errors.hpp"

namespace lbscan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape);

// Dense row-major tensor, innermost dimension last. Sequence tensors use
// (B, L, E) or (B, L, E, N); hidden states use (B, E, N).
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    validate_dims();
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_dims();
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  // Constructor for external input: also rejects NaN/Inf.
  static Tensor from_external(Shape shape, std::vector<T> data,
                              std::string_view name) {
    Tensor t(std::move(shape), std::move(data));
    t.check_finite(name);
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <class... Idx>
  T& operator()(Idx... idx) noexcept {
    return data_[offset(idx...)];
  }
  template <class... Idx>
  const T& operator()(Idx... idx) const noexcept {
    return data_[offset(idx...)];
  }

  template <class... Idx>
  std::size_t offset(Idx... idx) const noexcept {
    const std::size_t ids[] = {static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t i = 0; i < sizeof...(Idx); ++i) off = off * shape_[i] + ids[i];
    return off;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  void check_finite(std::string_view name) const {
    if (!all_finite()) throw NonFiniteError(std::string(name));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate_dims() const {
    for (std::size_t d : shape_) {
      if (d == 0) throw ShapeError("zero-sized dimension in shape " + shape_str(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using TensorD = Tensor<double>;
using TensorF = Tensor<float>;

void require_shape(const Shape& actual, const Shape& expected,
                   std::string_view name);

// Reverse a tensor along axis 1 (the sequence axis).
template <class T>
Tensor<T> reverse_seq(const Tensor<T>& t) {
  if (t.rank() < 2) throw ShapeError("reverse_seq needs rank >= 2");
  const std::size_t outer = t.dim(0);
  const std::size_t len = t.dim(1);
  const std::size_t inner = t.size() / (outer * len);
  Tensor<T> out(t.shape());
  for (std::size_t b = 0; b < outer; ++b) {
    for (std::size_t l = 0; l < len; ++l) {
      const T* src = t.ptr() + (b * len + l) * inner;
      T* dst = out.ptr() + (b * len + (len - 1 - l)) * inner;
      std::copy(src, src + inner, dst);
    }
  }
  return out;
}

// Max absolute difference divided by the reference's max magnitude
// (infinity-norm relative error). Returns 0 when both are identically zero.
template <class T, class U>
double max_rel_error(std::span<const T> actual, std::span<const U> reference) {
  if (actual.size() != reference.size()) {
    throw ShapeError("max_rel_error: length mismatch");
  }
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double r = static_cast<double>(reference[i]);
    diff = std::max(diff, std::abs(static_cast<double>(actual[i]) - r));
    scale = std::max(scale, std::abs(r));
  }
  if (diff == 0.0) return 0.0;
  return scale > 0.0 ? diff / scale : diff;
}

template <class T, class U>
double max_rel_error(const Tensor<T>& actual, const Tensor<U>& reference) {
  if (actual.shape() != reference.shape()) {
    throw ShapeError("max_rel_error: shape " + shape_str(actual.shape()) +
                     " vs " + shape_str(reference.shape()));
  }
  return max_rel_error(actual.data(), reference.data());
}

}  // namespace lbscan
