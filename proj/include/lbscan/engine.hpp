// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <type_traits>

#include "lbscan/scan_types.hpp"

namespace lbscan::engine {

// Sequence partition into worker tiles of `tile_len` elements. The final tile
// is shorter when the length is not a multiple of the tile length.
struct TilePlan {
  std::size_t length = 0;
  std::size_t tile_len = 0;
  std::size_t num_tiles = 0;

  // Any tile_len >= 1 (it may exceed the length: one partial tile).
  static TilePlan make(std::size_t length, std::size_t tile_len);
  // tile_len from select_tile_len(length).
  static TilePlan automatic(std::size_t length);

  std::size_t tile_begin(std::size_t k) const { return k * tile_len; }
  std::size_t tile_size(std::size_t k) const {
    const std::size_t b = tile_begin(k);
    return length - b < tile_len ? length - b : tile_len;
  }
  bool is_tile_end(std::size_t i) const {
    return (i + 1) % tile_len == 0 || i + 1 == length;
  }
};

// Elements per worker tile for a sequence length: 16 above 256, 8 above 128,
// 4 otherwise.
std::size_t select_tile_len(std::size_t length);

// Tiled parallel scan. Each (batch, channel) row is one work item and plays
// the role of a thread block whose threads own one tile each:
//   1. every tile scans its elements locally (aggregates kept in double),
//   2. tile aggregates are exchanged by a serial exclusive scan in tile order,
//   3. every tile re-applies its incoming prefix to its elements and emits y.
// The lbm variant additionally runs an exclusive reverse scan inside each tile
// before emission, with no extra exchange.
//
// Rows are split across workers; per-row arithmetic does not depend on the
// split, so results are bit-identical for any worker count. Instances are
// immutable and can be shared between threads.
class ScanEngine {
 public:
  explicit ScanEngine(std::size_t workers = 1);

  std::size_t workers() const noexcept { return workers_; }

  template <class T>
  ScanOutput<T> forward(const ScanParams<T>& p, const TilePlan& plan,
                        bool keep_states = false) const;

  template <class T>
  ScanOutput<T> lbm(const ScanParams<T>& p, const TilePlan& plan,
                    bool keep_states = false) const;

  // Two full forward sweeps, the second over the time-reversed sequence with
  // its own parameters; y = y^f + y^b. The cost report covers the two sweeps.
  template <class T>
  ScanOutput<T> global_bidir(const ScanParams<T>& forward_params,
                             const ScanParams<T>& backward_params,
                             const TilePlan& plan) const;

  // Fused selective-scan kernel: discretization happens inside the tile
  // phases. `backward_params` is required for global_bidir and ignored
  // otherwise.
  template <class T>
  ScanOutput<T> selective(Variant variant, const SelectiveParams<T>& params,
                          std::type_identity_t<const SelectiveParams<T>*> backward_params,
                          const TilePlan& plan) const;

 private:
  std::size_t workers_;
};

template <class T>
ScanOutput<T> forward_scan_par(const ScanParams<T>& p, const TilePlan& plan,
                               std::size_t workers) {
  return ScanEngine(workers).forward(p, plan);
}

template <class T>
ScanOutput<T> lbm_scan_par(const ScanParams<T>& p, const TilePlan& plan,
                           std::size_t workers) {
  return ScanEngine(workers).lbm(p, plan);
}

template <class T>
ScanOutput<T> global_bidir_par(const ScanParams<T>& forward_params,
                               const ScanParams<T>& backward_params,
                               const TilePlan& plan, std::size_t workers) {
  return ScanEngine(workers).global_bidir(forward_params, backward_params, plan);
}

}  // namespace lbscan::engine
