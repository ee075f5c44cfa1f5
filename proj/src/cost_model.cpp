// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/cost_model.hpp"

#include <fmt/format.h>

#include <stdexcept>

namespace lbscan::cost {

CostReport count_scan_cost(Variant variant, std::size_t batch, std::size_t length,
                           std::size_t inner, std::size_t state, std::size_t tile_len,
                           KernelForm form) {
  if (batch == 0 || length == 0 || inner == 0 || state == 0 || tile_len == 0) {
    throw std::invalid_argument("count_scan_cost: dimensions must be positive");
  }
  const std::uint64_t L = length, N = state;
  const std::uint64_t T = (length + tile_len - 1) / tile_len;
  const std::uint64_t rows = static_cast<std::uint64_t>(batch) * inner;

  // One forward sweep over one (batch, channel) row.
  CostReport row;
  // phase 1 local combines, phase 2 prefix updates, phase 3 apply + readout,
  // plus the skip-term add per step.
  row.flops = N * (3 * (L - T) + 2 * T + 2 * L + 2 * L) + L;
  row.tile_exchanges = N * T;
  row.register_ops = 2 * N * L;
  row.hbm_writes = L + N;  // y row and final state
  if (form == KernelForm::discretized) {
    row.hbm_reads = L * (3 * N + 1);  // abar, bx, c per lane; dx per step
  } else {
    row.hbm_reads = L * (2 + 2 * N) + N + 1;  // delta, x, B, C; A row and D
    row.flops += L * (2 + 6 * N);            // delta*x, D*x; exp(delta*A), B̄x
  }

  CostReport total;
  total.variant = variant;
  const std::uint64_t sweeps = variant == Variant::global_bidir ? 2 : 1;
  total.flops = sweeps * rows * row.flops;
  total.hbm_reads = sweeps * rows * row.hbm_reads;
  total.hbm_writes = sweeps * rows * row.hbm_writes;
  total.tile_exchanges = sweeps * rows * row.tile_exchanges;
  total.register_ops = sweeps * rows * row.register_ops;
  if (variant == Variant::lbm) {
    total.flops += rows * 3 * N * (L - T);  // decay, sum, injection per lane
    total.register_ops += rows * N * L;
  }
  return total;
}

ModelCost count_model_cost(const ModelConfig& config) {
  config.validate();
  const std::uint64_t L = config.seq_len();
  const std::uint64_t P = config.num_patches();
  const std::uint64_t D = config.embed_dim, E = config.inner_dim, N = config.state_dim;
  const std::uint64_t K = config.conv_kernel;
  const std::uint64_t C = config.num_classes;
  const std::uint64_t tf = kTranscendentalFlops;

  ModelCost out;
  // Patch projection with bias, positional embedding add.
  out.embed_flops = P * (2 * config.patch_dim() * D + D) + L * D;

  const std::uint64_t per_token =
      (4 * D + 4)             // RMS norm: squares+sum, rsqrt, two scalings
      + 2 * (2 * D * E)       // x and z projections
      + 2 * K * E + tf * E    // causal depthwise conv, SiLU
      + 2 * (2 * E * N)       // B and C projections
      + 2 * E * E + E + tf * E  // delta projection, bias, softplus
      + tf * E + E            // SiLU(z) gate and product
      + 2 * E * D + D;        // output projection, residual
  out.block_flops = config.depth * L * per_token;

  const CostReport scan = count_scan_cost(config.scan, 1, L, E, N,
                                          config.effective_tile_len(), KernelForm::fused);
  out.scan.variant = scan.variant;
  for (std::size_t u = 0; u < config.depth; ++u) out.scan += scan;
  out.scan_flops = out.scan.flops;

  // MLP: D -> 4D (GELU) -> classes.
  const std::uint64_t mlp = 2 * D * 4 * D + 4 * D + tf * 4 * D + 2 * 4 * D * C + C;
  if (config.class_token != ClassToken::none) {
    out.head_flops = mlp + (config.class_token == ClassToken::double_ ? 2 * D : 0);
  } else if (config.head == HeadType::gap) {
    out.head_flops = L * D + D + mlp;
  } else {
    const std::uint64_t H = config.map_heads;
    out.head_flops = 2 * (2 * L * D * D)  // K and V projections
                     + 2 * L * D          // query-key scores
                     + H * L * (tf + 2)   // softmax
                     + 2 * L * D          // weighted sum of values
                     + mlp;
  }
  return out;
}

std::string csv_header() {
  return "variant,flops,hbm_reads,hbm_writes,tile_exchanges,register_ops";
}

std::string to_csv_row(const CostReport& r) {
  return fmt::format("{},{},{},{},{},{}", to_string(r.variant), r.flops, r.hbm_reads,
                     r.hbm_writes, r.tile_exchanges, r.register_ops);
}

std::string format_table(std::span<const CostReport> reports) {
  std::string out = fmt::format("{:<14}{:>16}{:>16}{:>16}{:>16}{:>16}\n", "variant", "flops",
                                "hbm_reads", "hbm_writes", "tile_exch", "register_ops");
  for (const CostReport& r : reports) {
    out += fmt::format("{:<14}{:>16}{:>16}{:>16}{:>16}{:>16}\n", to_string(r.variant), r.flops,
                       r.hbm_reads, r.hbm_writes, r.tile_exchanges, r.register_ops);
  }
  return out;
}

std::string format_model_table(const ModelConfig& config, const ModelCost& cost) {
  std::string out = fmt::format(
      "image {}x{}, patch {}, L={}, D={}, E={}, N={}, U={}, M={}, scan={}\n", config.image_size,
      config.image_size, config.patch_size, config.seq_len(), config.embed_dim,
      config.inner_dim, config.state_dim, config.depth, config.effective_tile_len(),
      to_string(config.scan));
  out += fmt::format("{:<12}{:>16}\n", "stage", "flops");
  out += fmt::format("{:<12}{:>16}\n", "embed", cost.embed_flops);
  out += fmt::format("{:<12}{:>16}\n", "blocks", cost.block_flops);
  out += fmt::format("{:<12}{:>16}\n", "scan", cost.scan_flops);
  out += fmt::format("{:<12}{:>16}\n", "head", cost.head_flops);
  out += fmt::format("{:<12}{:>16}\n", "total", cost.total_flops());
  return out;
}

}  // namespace lbscan::cost
