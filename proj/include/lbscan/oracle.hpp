// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "lbscan/scan_types.hpp"

// Straight-line sequential references for every scan variant. Slow on purpose;
// all parallel code is tested against these.
namespace lbscan::oracle {

// h_t = abar_t * h_{t-1} + bx_t with h_{-1} = 0;
// y_t[e] = sum_n c_t[n] * h_t[e, n] + dx_t[e].
OracleOutput forward_scan_seq(const ScanParams<double>& p, bool keep_states = false);

// Same recurrence run from t = L-1 down to 0 with h_L = 0.
// h_final holds the state after processing t = 0.
OracleOutput global_backward_scan_seq(const ScanParams<double>& p,
                                      bool keep_states = false);

// y = y^f + y^b with independent parameter sets per direction.
OracleOutput global_bidir_seq(const ScanParams<double>& forward_params,
                              const ScanParams<double>& backward_params);

// Index of the last element of the tile containing `i`.
inline std::size_t tile_end(std::size_t i, std::size_t tile_len, std::size_t length) {
  const std::size_t end = tile_len * (i / tile_len + 1) - 1;
  return end < length ? end : length - 1;
}

// Exclusive tile-local backward state, reusing the forward parameters.
// Scanning i = L-1..0: the state resets to 0 at tile ends, otherwise it is
// multiplied by abar_i; it is recorded, and then bx_i is added.
// Returns (B, L, E, N). Throws RangeError unless 1 <= tile_len <= L.
TensorD local_backward_scan_seq(const TensorD& abar, const TensorD& bx,
                                std::size_t tile_len);

// y_t = sum_n c_t[n] * (h^f_t + h^b_t)[e, n] + dx_t[e], with h^b the exclusive
// local backward state above.
OracleOutput lbm_scan_seq(const ScanParams<double>& p, std::size_t tile_len,
                          bool keep_states = false);

}  // namespace lbscan::oracle
