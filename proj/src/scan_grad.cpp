// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/scan_grad.hpp"

#include <string>
#include <vector>

#include "lbscan/errors.hpp"
#include "lbscan/parallel.hpp"

namespace lbscan::autodiff {
namespace {

ScanGrads scan_grad(const ScanParams<double>& p, const TensorD& dy, std::size_t tile_len,
                    bool local_backward, std::size_t workers) {
  const ScanDims d = p.validate();
  require_shape(dy.shape(), {d.batch, d.length, d.inner}, "dy");
  dy.check_finite("dy");
  const std::size_t B = d.batch, L = d.length, E = d.inner, N = d.state;
  if (local_backward && (tile_len < 1 || tile_len > L)) {
    throw RangeError("tile length " + std::to_string(tile_len) + " outside [1, " +
                     std::to_string(L) + "]");
  }

  ScanGrads g{TensorD(p.abar.shape()), TensorD(p.bx.shape()), TensorD(p.c.shape()),
              TensorD(p.dx.shape())};
  // Batch items run in parallel; channels run in order inside one item so
  // the c gradient accumulates in a fixed order.
  parallel_for(B, workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<double> hf(L * N), r(L * N), lambda(N), nu(N);
    for (std::size_t row = begin * E; row < end * E; ++row) {
      const std::size_t b = row / E, e = row % E;
      auto at = [&](std::size_t t) { return ((b * L + t) * E + e) * N; };
      const double* a = p.abar.ptr();
      const double* bx = p.bx.ptr();

      // Recompute forward states and, if needed, exclusive in-tile states.
      for (std::size_t n = 0; n < N; ++n) {
        double h = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
          h = a[at(t) + n] * h + bx[at(t) + n];
          hf[t * N + n] = h;
        }
      }
      if (local_backward) {
        for (std::size_t t = L; t-- > 0;) {
          const bool tile_end = (t + 1) % tile_len == 0 || t + 1 == L;
          for (std::size_t n = 0; n < N; ++n) {
            r[t * N + n] = tile_end ? 0.0
                                    : a[at(t) + n] * (r[(t + 1) * N + n] + bx[at(t + 1) + n]);
          }
        }
      }

      // Global adjoint: lambda_t = s_t + a_{t+1} lambda_{t+1}.
      std::fill(lambda.begin(), lambda.end(), 0.0);
      for (std::size_t t = L; t-- > 0;) {
        const double dyt = dy(b, t, e);
        g.dx(b, t, e) = dyt;
        for (std::size_t n = 0; n < N; ++n) {
          const double s = dyt * p.c(b, t, n);
          lambda[n] = t + 1 < L ? s + a[at(t + 1) + n] * lambda[n] : s;
          g.bx[at(t) + n] = lambda[n];
          g.abar[at(t) + n] = t > 0 ? lambda[n] * hf[(t - 1) * N + n] : 0.0;
          g.c(b, t, n) += dyt * (local_backward ? hf[t * N + n] + r[t * N + n]
                                                      : hf[t * N + n]);
        }
      }

      // In-tile adjoint of g_t = r_t + bx_t, running forward from each tile
      // start: nu_t = a_{t-1} (s_{t-1} + nu_{t-1}).
      if (local_backward) {
        for (std::size_t t = 0; t < L; ++t) {
          const bool tile_start = t % tile_len == 0;
          const bool tile_end = (t + 1) % tile_len == 0 || t + 1 == L;
          const double dyt = dy(b, t, e);
          for (std::size_t n = 0; n < N; ++n) {
            if (tile_start) {
              nu[n] = 0.0;
            } else {
              const double s_prev = dy(b, t - 1, e) * p.c(b, t - 1, n);
              nu[n] = a[at(t - 1) + n] * (s_prev + nu[n]);
            }
            g.bx[at(t) + n] += nu[n];
            if (!tile_end) {
              const double s = dyt * p.c(b, t, n);
              g.abar[at(t) + n] += (s + nu[n]) * (r[(t + 1) * N + n] + bx[at(t + 1) + n]);
            }
          }
        }
      }
    }
  });

  return g;
}

ScanGrads reversed(const ScanGrads& g) {
  return {reverse_seq(g.abar), reverse_seq(g.bx), reverse_seq(g.c), reverse_seq(g.dx)};
}

}  // namespace

ScanGrads forward_scan_grad(const ScanParams<double>& p, const TensorD& dy,
                            std::size_t workers) {
  return scan_grad(p, dy, 1, false, workers);
}

ScanGrads lbm_scan_grad(const ScanParams<double>& p, const TensorD& dy, std::size_t tile_len,
                        std::size_t workers) {
  return scan_grad(p, dy, tile_len, true, workers);
}

BidirGrads global_bidir_grad(const ScanParams<double>& forward_params,
                             const ScanParams<double>& backward_params, const TensorD& dy,
                             std::size_t workers) {
  require_shape(backward_params.abar.shape(), forward_params.abar.shape(), "backward abar");
  BidirGrads out;
  out.forward = forward_scan_grad(forward_params, dy, workers);
  out.backward = reversed(
      forward_scan_grad(backward_params.reversed(), reverse_seq(dy), workers));
  return out;
}

}  // namespace lbscan::autodiff
