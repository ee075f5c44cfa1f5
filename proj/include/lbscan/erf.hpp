// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "lbscan/model.hpp"

namespace lbscan::erf {

// Sequence index of the patch token at the grid center (row g/2, column
// g/2), counting class tokens, in the original token order.
std::size_t center_token(const ModelConfig& config);

struct ErfMap {
  TensorD raw;   // (H, W): mean over the batch of sum_c |d||out||^2 / d pixel|
  TensorD heat;  // raw / max(raw), or all zero when raw is all zero
  std::size_t token = 0;
};

// Effective receptive field of output token `token` (default: the center
// patch token) of the backbone.
ErfMap compute_erf(const Model& model, const TensorD& images, std::size_t workers = 1);
ErfMap compute_erf(const Model& model, const TensorD& images, std::size_t token,
                   std::size_t workers);

// ||out_token||^2 summed over the batch; the objective compute_erf
// differentiates.
double erf_objective(const Model& model, const TensorD& images, std::size_t token,
                     std::size_t workers = 1);

// 8-bit binary PGM (P5), value 255 * heat rounded to nearest.
std::string to_pgm(const TensorD& heat);
// One row per image row, comma separated.
std::string to_csv(const TensorD& heat);

}  // namespace lbscan::erf
