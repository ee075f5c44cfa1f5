// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "lbscan/tensor.hpp"

namespace lbscan {

enum class Variant { forward, global_bidir, lbm };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

// Which inputs the scan kernel consumes.
//  discretized: precomputed abar and B̄x tensors of shape (B, L, E, N).
//  fused: Δ, A, B, x; the (B, L, E, N) coefficients are formed in registers.
enum class KernelForm { discretized, fused };

std::string_view to_string(KernelForm f);
KernelForm parse_kernel_form(std::string_view s);

// Operation and traffic counters for one scan call. Traffic is in elements.
struct CostReport {
  Variant variant = Variant::forward;
  std::uint64_t flops = 0;
  std::uint64_t hbm_reads = 0;
  std::uint64_t hbm_writes = 0;
  std::uint64_t tile_exchanges = 0;
  std::uint64_t register_ops = 0;

  std::uint64_t hbm_elems() const { return hbm_reads + hbm_writes; }

  CostReport& operator+=(const CostReport& o) {
    flops += o.flops;
    hbm_reads += o.hbm_reads;
    hbm_writes += o.hbm_writes;
    tile_exchanges += o.tile_exchanges;
    register_ops += o.register_ops;
    return *this;
  }

  friend bool operator==(const CostReport&, const CostReport&) = default;
};

struct ScanDims {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::size_t inner = 0;   // E
  std::size_t state = 0;   // N
};

// Discretized recurrence coefficients for one direction:
//   abar, bx: (B, L, E, N);  c: (B, L, N);  dx: (B, L, E).
template <class T>
struct ScanParams {
  Tensor<T> abar;
  Tensor<T> bx;
  Tensor<T> c;
  Tensor<T> dx;

  // Validates shapes and finiteness, returns the dimensions.
  ScanDims validate() const;

  template <class U>
  ScanParams<U> cast() const {
    return {abar.template cast<U>(), bx.template cast<U>(), c.template cast<U>(),
            dx.template cast<U>()};
  }

  ScanParams reversed() const {
    return {reverse_seq(abar), reverse_seq(bx), reverse_seq(c), reverse_seq(dx)};
  }
};

// Inputs of the fused selective-scan kernel:
//   delta, x: (B, L, E);  a: (E, N) (negative);  b, c: (B, L, N);  d: (E).
// Discretization: abar = exp(delta*a), bx = delta*b*x, dx = d*x.
template <class T>
struct SelectiveParams {
  Tensor<T> delta;
  Tensor<T> a;
  Tensor<T> b;
  Tensor<T> c;
  Tensor<T> d;
  Tensor<T> x;

  ScanDims validate() const;

  ScanParams<T> discretize() const;

  SelectiveParams reversed() const {
    return {reverse_seq(delta), a, reverse_seq(b), reverse_seq(c), d, reverse_seq(x)};
  }
};

// y: (B, L, E); h_final: forward-direction state after the last token
// (B, E, N); per_step_h: combined state per step (B, L, E, N) when requested.
template <class T>
struct ScanOutput {
  Tensor<T> y;
  Tensor<T> h_final;
  std::optional<Tensor<T>> per_step_h;
  CostReport cost;
};

using OracleOutput = ScanOutput<double>;

}  // namespace lbscan
