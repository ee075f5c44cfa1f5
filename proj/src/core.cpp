// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>

#include "lbscan/parallel.hpp"
#include "lbscan/rng.hpp"
#include "lbscan/tensor.hpp"

namespace lbscan {

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

void require_shape(const Shape& actual, const Shape& expected,
                   std::string_view name) {
  if (actual != expected) {
    throw ShapeError("tensor '" + std::string(name) + "' has shape " +
                     shape_str(actual) + ", expected " + shape_str(expected));
  }
}

std::size_t Rng::below(std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return static_cast<std::size_t>(v % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * std::cos(theta);
}

std::size_t workers_from_env(std::size_t fallback) {
  const char* env = std::getenv("LBSCAN_WORKERS");
  if (env == nullptr || *env == '\0') return fallback;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return fallback;
  return static_cast<std::size_t>(v);
}

}  // namespace lbscan
