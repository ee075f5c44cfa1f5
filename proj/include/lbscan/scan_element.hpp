// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace lbscan {

// Affine map h -> a*h + b for one state lane. Composition of these maps is
// the monoid every scan variant is built on.
template <class T>
struct ScanElement {
  T a{1};
  T b{0};

  static constexpr ScanElement identity() noexcept { return {T{1}, T{0}}; }

  constexpr T apply(T h) const noexcept { return a * h + b; }

  friend constexpr bool operator==(const ScanElement&, const ScanElement&) = default;
};

// "Apply p, then q".
template <class T>
constexpr ScanElement<T> combine(const ScanElement<T>& p,
                                 const ScanElement<T>& q) noexcept {
  return {q.a * p.a, q.a * p.b + q.b};
}

}  // namespace lbscan
