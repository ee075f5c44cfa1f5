// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "lbscan/config.hpp"
#include "lbscan/scan_types.hpp"

// Analytic operation and traffic counts for the tiled scan kernel and for a
// whole backbone.
//
// Conventions: a multiply-add is 2 FLOPs; exp, softplus, SiLU and GELU count
// 4 FLOPs each; traffic is counted in elements. The scan formulas mirror the
// kernel's phases exactly, and the instrumented counters of the engine must
// agree with them to the unit.
namespace lbscan::cost {

inline constexpr std::uint64_t kTranscendentalFlops = 4;

CostReport count_scan_cost(Variant variant, std::size_t batch, std::size_t length,
                           std::size_t inner, std::size_t state, std::size_t tile_len,
                           KernelForm form = KernelForm::fused);

// Per-image totals for one model, split by stage.
struct ModelCost {
  std::uint64_t embed_flops = 0;
  std::uint64_t block_flops = 0;  // projections, conv, gates; scan excluded
  std::uint64_t scan_flops = 0;
  std::uint64_t head_flops = 0;
  CostReport scan;                // summed scan reports over all blocks

  std::uint64_t total_flops() const {
    return embed_flops + block_flops + scan_flops + head_flops;
  }
};

ModelCost count_model_cost(const ModelConfig& config);

std::string csv_header();
std::string to_csv_row(const CostReport& report);
// Aligned human-readable table, one row per report.
std::string format_table(std::span<const CostReport> reports);
std::string format_model_table(const ModelConfig& config, const ModelCost& cost);

}  // namespace lbscan::cost
