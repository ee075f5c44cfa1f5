// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

// Oracle-equivalence sweeps and scan timing, shared by the CLI, the
// acceptance suite and the Python module.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lbscan/config.hpp"
#include "lbscan/scan_types.hpp"

namespace lbscan::harness {

// Random scan coefficients: abar in [0, 1), everything else in [-1, 1].
ScanParams<double> random_scan_params(std::uint64_t seed, std::size_t B, std::size_t L,
                                      std::size_t E, std::size_t N);

struct VerifyConfig {
  std::vector<std::size_t> lengths{1, 5, 31, 128, 129, 256, 257, 1024, 4096};
  std::vector<std::size_t> tiles{1, 3, 4, 8, 16};
  std::vector<std::size_t> workers{1, 2, 4, 8};
  std::vector<Variant> variants{Variant::forward, Variant::global_bidir, Variant::lbm};
  std::vector<Precision> precisions{Precision::single_, Precision::double_};
  std::uint64_t seed = 1;
  std::size_t batch = 2, inner = 4, state = 3;
};

struct VerifyRow {
  Variant variant{};
  Precision precision{};
  std::size_t length = 0, tile_len = 0, workers = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

// 1e-5 for single, 1e-12 for double.
double verify_tolerance(Precision p);

// Engine output against the sequential oracle for every grid point. Single
// precision runs on float-rounded inputs, and the oracle sees the same
// rounded values in double.
std::vector<VerifyRow> run_verify(const VerifyConfig& config);

struct BenchConfig {
  std::size_t length = 4096;
  std::size_t tile_len = 0;  // 0 selects from the length
  std::size_t batch = 16, inner = 256, state = 16;
  std::size_t workers = 4;
  std::size_t reps = 20;
  std::vector<Variant> variants{Variant::forward, Variant::lbm, Variant::global_bidir};
  Precision precision = Precision::single_;
  std::uint64_t seed = 1;
};

struct BenchRow {
  Variant variant{};
  std::size_t length = 0, tile_len = 0, workers = 0;
  double median_ns = 0.0;
  CostReport cost;  // instrumented counters of one call
};

// Times the fused selective-scan kernel. One untimed warm-up call per
// variant, then `reps` rounds that run every variant once each, so slow
// drift in machine load affects all variants alike.
std::vector<BenchRow> run_bench(const BenchConfig& config);

std::string bench_csv_header();
std::string bench_csv_row(const BenchRow& row);

double median(std::vector<double> values);

}  // namespace lbscan::harness
