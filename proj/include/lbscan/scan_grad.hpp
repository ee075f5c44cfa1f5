// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "lbscan/scan_types.hpp"

namespace lbscan::autodiff {

// Gradients with respect to each scan input, same shapes as the inputs.
struct ScanGrads {
  TensorD abar;
  TensorD bx;
  TensorD c;
  TensorD dx;
};

// Reverse-mode gradients of y for the three scan variants in double
// precision. Hidden states are recomputed rather than cached.
//
// The adjoint of the forward recurrence is a reversed recurrence over the full
// sequence; the adjoint of the in-tile backward pass is an in-tile forward
// pass. Batch items run in parallel and the c gradient is accumulated over
// channels in a fixed order, so results do not depend on `workers`.
ScanGrads forward_scan_grad(const ScanParams<double>& p, const TensorD& dy,
                            std::size_t workers = 1);
ScanGrads lbm_scan_grad(const ScanParams<double>& p, const TensorD& dy, std::size_t tile_len,
                        std::size_t workers = 1);

struct BidirGrads {
  ScanGrads forward;
  ScanGrads backward;
};
BidirGrads global_bidir_grad(const ScanParams<double>& forward_params,
                             const ScanParams<double>& backward_params, const TensorD& dy,
                             std::size_t workers = 1);

}  // namespace lbscan::autodiff
