// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

// Eigen views over row-major tensors. Internal to the library.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>

#include "lbscan/tensor.hpp"

namespace lbscan::detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatView = Eigen::Map<RowMat>;
using ConstMatView = Eigen::Map<const RowMat>;
using VecView = Eigen::Map<Eigen::VectorXd>;
using ConstVecView = Eigen::Map<const Eigen::VectorXd>;

// Views a tensor as (size / cols, cols).
inline ConstMatView mat(const TensorD& t, std::size_t cols) {
  return ConstMatView(t.ptr(), static_cast<Eigen::Index>(t.size() / cols),
                      static_cast<Eigen::Index>(cols));
}
inline MatView mat(TensorD& t, std::size_t cols) {
  return MatView(t.ptr(), static_cast<Eigen::Index>(t.size() / cols),
                 static_cast<Eigen::Index>(cols));
}
// Views a rank-2 tensor with its own shape.
inline ConstMatView mat(const TensorD& t) { return mat(t, t.dim(t.rank() - 1)); }
inline MatView mat(TensorD& t) { return mat(t, t.dim(t.rank() - 1)); }

inline ConstVecView vec(const TensorD& t) {
  return ConstVecView(t.ptr(), static_cast<Eigen::Index>(t.size()));
}
inline VecView vec(TensorD& t) { return VecView(t.ptr(), static_cast<Eigen::Index>(t.size())); }

inline double sigmoid(double v) {
  return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}
inline double silu(double v) { return v * sigmoid(v); }
inline double silu_grad(double v) {
  const double s = sigmoid(v);
  return s * (1.0 + v * (1.0 - s));
}
inline double softplus(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }

// Tanh-free exact GELU.
inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }
inline double gelu_grad(double v) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(v / std::sqrt(2.0))) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
}

}  // namespace lbscan::detail
