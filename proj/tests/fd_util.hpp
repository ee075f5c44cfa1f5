// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

// Central finite differences for gradient checks. The perturbed objective is
// evaluated in long double so that the difference quotient stays accurate for
// gradient entries far below the output magnitude.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "lbscan/scan_types.hpp"

namespace lbscan::testing {

using Real = long double;
using RealVec = std::vector<Real>;

inline constexpr double kFdStep = 1e-5;

// Gradient-check error: |a - n| / max(|a|, |n|, 1e-8).
inline double grad_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

// Perturbs every element of `x` in place (restoring it afterwards) and
// compares sum(w * dy) / 2h against `analytic`. Returns the largest error.
inline double fd_max_error(TensorD& x, const TensorD& analytic,
                           const std::function<RealVec()>& outputs, const TensorD& weights,
                           double step = kFdStep) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const RealVec up = outputs();
    x[i] = saved - step;
    const RealVec down = outputs();
    x[i] = saved;
    // The perturbation actually applied is the rounded double difference.
    const Real h2 = static_cast<Real>(saved + step) - static_cast<Real>(saved - step);
    Real acc = 0;
    for (std::size_t k = 0; k < up.size(); ++k) acc += weights[k] * (up[k] - down[k]);
    worst = std::max(worst, grad_rel_error(analytic[i], static_cast<double>(acc / h2)));
  }
  return worst;
}

// Sequential scan references in long double. `tile_len` = 0 disables the
// in-tile backward term; `reverse` scans from the end.
inline RealVec ref_scan_y(const ScanParams<double>& p, std::size_t tile_len, bool reverse) {
  const std::size_t B = p.abar.dim(0), L = p.abar.dim(1), E = p.abar.dim(2),
                    N = p.abar.dim(3);
  RealVec y(B * L * E);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t e = 0; e < E; ++e) {
      for (std::size_t i = 0; i < L; ++i) y[(b * L + i) * E + e] = p.dx(b, i, e);
      for (std::size_t n = 0; n < N; ++n) {
        Real h = 0;
        for (std::size_t k = 0; k < L; ++k) {
          const std::size_t i = reverse ? L - 1 - k : k;
          h = p.abar(b, i, e, n) * h + p.bx(b, i, e, n);
          y[(b * L + i) * E + e] += p.c(b, i, n) * h;
        }
        if (tile_len == 0) continue;
        Real r = 0;
        for (std::size_t i = L; i-- > 0;) {
          const bool end = (i + 1) % tile_len == 0 || i + 1 == L;
          r = end ? 0 : p.abar(b, i, e, n) * (r + p.bx(b, i + 1, e, n));
          y[(b * L + i) * E + e] += p.c(b, i, n) * r;
        }
      }
    }
  return y;
}

}  // namespace lbscan::testing
