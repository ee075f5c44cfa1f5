// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/oracle.hpp"

#include <string>

namespace lbscan::oracle {
namespace {

// y_t[e] = sum_n c_t[n] h_t[e, n] + dx_t[e] for a full (B, L, E, N) state.
TensorD emit(const TensorD& h, const ScanParams<double>& p, const ScanDims& d) {
  TensorD y({d.batch, d.length, d.inner});
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t t = 0; t < d.length; ++t) {
      for (std::size_t e = 0; e < d.inner; ++e) {
        double acc = 0.0;
        for (std::size_t n = 0; n < d.state; ++n) acc += p.c(b, t, n) * h(b, t, e, n);
        y(b, t, e) = acc + p.dx(b, t, e);
      }
    }
  }
  return y;
}

TensorD final_state(const TensorD& h, const ScanDims& d, std::size_t t) {
  TensorD out({d.batch, d.inner, d.state});
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t e = 0; e < d.inner; ++e)
      for (std::size_t n = 0; n < d.state; ++n) out(b, e, n) = h(b, t, e, n);
  return out;
}

TensorD inclusive_states(const ScanParams<double>& p, const ScanDims& d, bool backward) {
  TensorD h(p.abar.shape());
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t e = 0; e < d.inner; ++e) {
      for (std::size_t n = 0; n < d.state; ++n) {
        double state = 0.0;
        for (std::size_t k = 0; k < d.length; ++k) {
          const std::size_t t = backward ? d.length - 1 - k : k;
          state = p.abar(b, t, e, n) * state + p.bx(b, t, e, n);
          h(b, t, e, n) = state;
        }
      }
    }
  }
  return h;
}

}  // namespace

OracleOutput forward_scan_seq(const ScanParams<double>& p, bool keep_states) {
  const ScanDims d = p.validate();
  TensorD h = inclusive_states(p, d, false);
  OracleOutput out;
  out.y = emit(h, p, d);
  out.h_final = final_state(h, d, d.length - 1);
  if (keep_states) out.per_step_h = std::move(h);
  return out;
}

OracleOutput global_backward_scan_seq(const ScanParams<double>& p, bool keep_states) {
  const ScanDims d = p.validate();
  TensorD h = inclusive_states(p, d, true);
  OracleOutput out;
  out.y = emit(h, p, d);
  out.h_final = final_state(h, d, 0);
  if (keep_states) out.per_step_h = std::move(h);
  return out;
}

OracleOutput global_bidir_seq(const ScanParams<double>& forward_params,
                              const ScanParams<double>& backward_params) {
  const ScanDims df = forward_params.validate();
  const ScanDims db = backward_params.validate();
  if (df.batch != db.batch || df.length != db.length || df.inner != db.inner ||
      df.state != db.state) {
    throw ShapeError("forward and backward parameter sets differ in shape");
  }
  OracleOutput out = forward_scan_seq(forward_params);
  const OracleOutput back = global_backward_scan_seq(backward_params);
  for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] += back.y[i];
  return out;
}

TensorD local_backward_scan_seq(const TensorD& abar, const TensorD& bx,
                                std::size_t tile_len) {
  if (abar.rank() != 4) throw ShapeError("abar must be (B, L, E, N)");
  require_shape(bx.shape(), abar.shape(), "bx");
  abar.check_finite("abar");
  bx.check_finite("bx");
  const std::size_t B = abar.dim(0), L = abar.dim(1), E = abar.dim(2), N = abar.dim(3);
  if (tile_len < 1 || tile_len > L) {
    throw RangeError("tile length " + std::to_string(tile_len) +
                     " outside [1, " + std::to_string(L) + "]");
  }
  TensorD hb(abar.shape());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t e = 0; e < E; ++e) {
      for (std::size_t n = 0; n < N; ++n) {
        double state = 0.0;
        for (std::size_t i = L; i-- > 0;) {
          if ((i + 1) % tile_len == 0 || i == L - 1) {
            state = 0.0;
          } else {
            state = abar(b, i, e, n) * state;
          }
          hb(b, i, e, n) = state;
          state = state + bx(b, i, e, n);
        }
      }
    }
  }
  return hb;
}

OracleOutput lbm_scan_seq(const ScanParams<double>& p, std::size_t tile_len,
                          bool keep_states) {
  const ScanDims d = p.validate();
  TensorD h = inclusive_states(p, d, false);
  const TensorD hb = local_backward_scan_seq(p.abar, p.bx, tile_len);
  OracleOutput out;
  out.h_final = final_state(h, d, d.length - 1);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = h[i] + hb[i];
  out.y = emit(h, p, d);
  if (keep_states) out.per_step_h = std::move(h);
  return out;
}

}  // namespace lbscan::oracle
