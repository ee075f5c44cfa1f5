// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tuple>
#include <vector>

#include "doctest.h"
#include "lbscan/cost_model.hpp"
#include "lbscan/engine.hpp"
#include "test_util.hpp"

using namespace lbscan;
using namespace lbscan::testing;
using engine::ScanEngine;
using engine::TilePlan;

namespace {

// Direct per-phase tally for one row, written independently of the library
// formula: local combines, prefix exchange, apply and readout.
std::uint64_t tally_row_flops(std::size_t L, std::size_t M, std::size_t N, bool lbm,
                              bool fused) {
  std::uint64_t f = 0;
  for (std::size_t s = 0; s < L; s += M) {
    const std::size_t m = std::min(M, L - s);
    f += 3 * (m - 1) * N;  // phase 1
    f += 2 * N;            // phase 2
    f += m * 4 * N + m;    // phase 3: h update, c*(h) accumulate, skip add
    if (lbm) f += 3 * (m - 1) * N;
  }
  if (fused) f += L * (2 + 6 * N);
  return f;
}

CostReport instrumented(Variant v, const SelectiveParams<double>& s, std::size_t M) {
  const TilePlan plan = TilePlan::make(s.x.dim(1), M);
  return ScanEngine(2).selective(v, s, &s, plan).cost;
}

}  // namespace

TEST_CASE("instrumented counters equal the analytic model") {
  const std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, std::size_t>>
      cases = {{1, 64, 3, 4, 16}, {2, 150, 3, 4, 8}, {1, 37, 2, 5, 4}, {1, 20, 2, 3, 1},
               {1, 5, 2, 2, 16}};
  for (const auto& [B, L, E, N, M] : cases) {
    CAPTURE(L);
    CAPTURE(M);
    const SelectiveParams<double> s = random_selective(3, B, L, E, N);
    for (Variant v : {Variant::forward, Variant::lbm, Variant::global_bidir}) {
      CAPTURE(to_string(v));
      CHECK(instrumented(v, s, M) == cost::count_scan_cost(v, B, L, E, N, M));
      const TilePlan plan = TilePlan::make(L, M);
      const ScanParams<double> p = s.discretize();
      const ScanEngine eng(1);
      CostReport got = v == Variant::forward ? eng.forward(p, plan).cost
                       : v == Variant::lbm   ? eng.lbm(p, plan).cost
                                             : eng.global_bidir(p, p, plan).cost;
      CHECK(got == cost::count_scan_cost(v, B, L, E, N, M, KernelForm::discretized));
    }
  }
}

TEST_CASE("per-row flops match a phase-by-phase tally") {
  for (std::size_t L : {1, 7, 16, 33, 256}) {
    for (std::size_t M : {1, 4, 16}) {
      for (bool fused : {false, true}) {
        const KernelForm form = fused ? KernelForm::fused : KernelForm::discretized;
        CHECK(cost::count_scan_cost(Variant::forward, 1, L, 1, 3, M, form).flops ==
              tally_row_flops(L, M, 3, false, fused));
        CHECK(cost::count_scan_cost(Variant::lbm, 1, L, 1, 3, M, form).flops ==
              tally_row_flops(L, M, 3, true, fused));
      }
    }
  }
}

TEST_CASE("lbm over forward flop ratio stays in [1.20, 1.35] for L >= 256, M = 16") {
  for (std::size_t L : {256, 512, 1024, 4096, 16384}) {
    const double fwd = static_cast<double>(cost::count_scan_cost(Variant::forward, 1, L, 64, 16, 16).flops);
    const double lbm = static_cast<double>(cost::count_scan_cost(Variant::lbm, 1, L, 64, 16, 16).flops);
    CAPTURE(L);
    CHECK(lbm / fwd >= 1.20);
    CHECK(lbm / fwd <= 1.35);
  }
}

TEST_CASE("lbm adds compute but no traffic or exchanges") {
  const CostReport f = cost::count_scan_cost(Variant::forward, 2, 4096, 32, 16, 16);
  const CostReport l = cost::count_scan_cost(Variant::lbm, 2, 4096, 32, 16, 16);
  const CostReport g = cost::count_scan_cost(Variant::global_bidir, 2, 4096, 32, 16, 16);
  CHECK(l.hbm_elems() == f.hbm_elems());
  CHECK(l.tile_exchanges == f.tile_exchanges);
  CHECK(g.hbm_elems() == 2 * f.hbm_elems());
  CHECK(g.flops == 2 * f.flops);
  CHECK(g.tile_exchanges == 2 * f.tile_exchanges);
}

TEST_CASE("M = 1 makes lbm cost the same flops as forward") {
  for (KernelForm form : {KernelForm::discretized, KernelForm::fused}) {
    CHECK(cost::count_scan_cost(Variant::lbm, 1, 100, 4, 8, 1, form).flops ==
          cost::count_scan_cost(Variant::forward, 1, 100, 4, 8, 1, form).flops);
  }
}

TEST_CASE("costs scale linearly in batch and channels, monotonically in length") {
  for (Variant v : {Variant::forward, Variant::lbm, Variant::global_bidir}) {
    const CostReport one = cost::count_scan_cost(v, 1, 512, 1, 8, 16);
    const CostReport many = cost::count_scan_cost(v, 3, 512, 5, 8, 16);
    CHECK(many.flops == 15 * one.flops);
    CHECK(many.hbm_elems() == 15 * one.hbm_elems());
    // Whole tiles: doubling L doubles everything but the constant N+1 loads
    // and the final-state store.
    const CostReport twice = cost::count_scan_cost(v, 1, 1024, 1, 8, 16);
    CHECK(twice.flops == 2 * one.flops);
    CHECK(twice.tile_exchanges == 2 * one.tile_exchanges);
    std::uint64_t prev = 0;
    for (std::size_t L = 1; L < 300; L += 7) {
      const std::uint64_t f = cost::count_scan_cost(v, 1, L, 2, 4, 8).flops;
      CHECK(f > prev);
      prev = f;
    }
  }
}

TEST_CASE("count_scan_cost rejects empty dimensions") {
  CHECK_THROWS_AS(cost::count_scan_cost(Variant::lbm, 1, 0, 1, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(cost::count_scan_cost(Variant::lbm, 1, 8, 1, 1, 0), std::invalid_argument);
}

TEST_CASE("model cost: lbm backbone costs more than forward-only, by the scan delta") {
  ModelConfig c = desk_config();
  const cost::ModelCost lbm = cost::count_model_cost(c);
  c.scan = Variant::forward;
  const cost::ModelCost fwd = cost::count_model_cost(c);
  CHECK(lbm.embed_flops == fwd.embed_flops);
  CHECK(lbm.block_flops == fwd.block_flops);
  CHECK(lbm.head_flops == fwd.head_flops);
  const std::uint64_t L = c.seq_len(), N = c.state_dim, E = c.inner_dim;
  const std::uint64_t T = (L + c.effective_tile_len() - 1) / c.effective_tile_len();
  CHECK(lbm.total_flops() - fwd.total_flops() == c.depth * E * 3 * N * (L - T));
}

TEST_CASE("model cost: projections dominate and grow with depth") {
  ModelConfig c = desk_config();
  const cost::ModelCost a = cost::count_model_cost(c);
  c.depth *= 2;
  const cost::ModelCost b = cost::count_model_cost(c);
  CHECK(b.block_flops == 2 * a.block_flops);
  CHECK(b.scan_flops == 2 * a.scan_flops);
  CHECK(a.block_flops > a.scan_flops);
  CHECK(a.head_flops > 0);
}

TEST_CASE("model cost: total flops grow monotonically with the inner width") {
  ModelConfig c = desk_config();
  std::uint64_t prev = 0;
  for (std::size_t E : {32, 64, 128, 256}) {
    c.inner_dim = E;
    const std::uint64_t total = cost::count_model_cost(c).total_flops();
    CHECK(total > prev);
    prev = total;
  }
}

TEST_CASE("model cost: M = 1 equals the forward-only model") {
  ModelConfig c = desk_config();
  c.tile_len = 1;
  const cost::ModelCost lbm = cost::count_model_cost(c);
  c.scan = Variant::forward;
  const cost::ModelCost fwd = cost::count_model_cost(c);
  CHECK(lbm.total_flops() == fwd.total_flops());
  CHECK(lbm.scan_flops == fwd.scan_flops);
}

TEST_CASE("model cost: scan flops are linear in the sequence length") {
  ModelConfig c = desk_config();
  c.tile_len = 16;
  c.patch_size = 8;  // 16 tokens
  const cost::ModelCost a = cost::count_model_cost(c);
  c.patch_size = 4;  // 64 tokens
  const cost::ModelCost b = cost::count_model_cost(c);
  c.patch_size = 2;  // 256 tokens
  const cost::ModelCost d = cost::count_model_cost(c);
  CHECK(b.scan_flops == 4 * a.scan_flops);
  CHECK(d.scan_flops == 16 * a.scan_flops);
}

TEST_CASE("csv and table output") {
  const CostReport r = cost::count_scan_cost(Variant::lbm, 1, 16, 1, 1, 4);
  CHECK(cost::csv_header() == "variant,flops,hbm_reads,hbm_writes,tile_exchanges,register_ops");
  const std::string row = cost::to_csv_row(r);
  CHECK(row.rfind("lbm,", 0) == 0);
  CHECK(std::count(row.begin(), row.end(), ',') == 5);
  const std::vector<CostReport> rs = {r, r};
  const std::string table = cost::format_table(rs);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
}
