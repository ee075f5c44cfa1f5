// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "lbscan/config.hpp"
#include "lbscan/rng.hpp"
#include "lbscan/scan_types.hpp"

namespace lbscan {

// Learnable tensors of one block. Linear maps are stored (in, out) so that a
// token row multiplies on the left.
struct BlockWeights {
  TensorD norm_scale;  // (D)
  TensorD w_x;         // (D, E)
  TensorD w_z;         // (D, E)
  TensorD conv;        // (E, K); column K-1 multiplies the current token
  TensorD w_b;         // (E, N)
  TensorD w_c;         // (E, N)
  TensorD w_delta;     // (E, E)
  TensorD delta_bias;  // (E)
  TensorD a_log;       // (E, N); A = -exp(a_log)
  TensorD d;           // (E)
  TensorD w_out;       // (E, D)

  static BlockWeights zeros(std::size_t embed, std::size_t inner, std::size_t state,
                            std::size_t kernel);

  std::size_t embed_dim() const { return w_x.dim(0); }
  std::size_t inner_dim() const { return w_x.dim(1); }
  std::size_t state_dim() const { return w_b.dim(1); }
  std::size_t kernel() const { return conv.dim(1); }

  // Throws ShapeError on inconsistent shapes, NonFiniteError on NaN/Inf.
  void validate() const;

  // Visits (name, tensor) in a fixed order.
  template <class F>
  void for_each(F&& f) { visit(*this, f); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f); }

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f) {
    f("norm_scale", s.norm_scale);
    f("w_x", s.w_x);
    f("w_z", s.w_z);
    f("conv", s.conv);
    f("w_b", s.w_b);
    f("w_c", s.w_c);
    f("w_delta", s.w_delta);
    f("delta_bias", s.delta_bias);
    f("a_log", s.a_log);
    f("d", s.d);
    f("w_out", s.w_out);
  }
};

// Uniform(+-1/sqrt(fan_in)) projections, unit norm scale, D = 1,
// A = -(1..N) per channel, softplus(delta_bias) log-uniform in [1e-3, 1e-1].
// Every value is rounded to float so checkpoints reproduce it exactly.
BlockWeights init_block_weights(std::size_t embed, std::size_t inner, std::size_t state,
                                std::size_t kernel, Rng& rng);

struct BlockOptions {
  std::size_t tile_len = 0;  // 0 selects from the sequence length
  Variant scan = Variant::lbm;
  Discretization discretization = Discretization::exp;
  Precision precision = Precision::double_;
  bool reverse = true;
  std::size_t workers = 1;

  static BlockOptions from_config(const ModelConfig& config, std::size_t workers = 1);
  // Tile length actually used for a sequence of `length` tokens.
  std::size_t tile_for(std::size_t length) const;
};

// Input-dependent scan coefficients from the post-conv activations
// x (B, L, E): delta = softplus(x W_delta + delta_bias), abar = exp(delta A),
// bx = (delta x) B with B = x W_b, c = x W_c, dx = D x.
// Throws NonFiniteError naming the first non-finite tensor.
ScanParams<double> discretize(const TensorD& x, const BlockWeights& w,
                              Discretization mode = Discretization::exp);

// Intermediates kept by the forward pass for the backward pass.
struct BlockCache {
  TensorD input;     // (B, L, D)
  TensorD inv_rms;   // (B, L)
  TensorD normed;    // (B, L, D), before the scale
  TensorD xp;        // (B, L, E) projection before the conv
  TensorD xc;        // (B, L, E) conv output before SiLU
  TensorD xs;        // (B, L, E) SiLU(xc)
  TensorD z;         // (B, L, E)
  TensorD delta_pre; // (B, L, E)
  TensorD delta;     // (B, L, E)
  TensorD bm;        // (B, L, N)
  ScanParams<double> scan;
  TensorD y;         // (B, L, E) scan output
  TensorD gated;     // (B, L, E) y * SiLU(z)
};

// One block on a (B, L, D) sequence: RMS norm, x/z projections, causal
// depthwise conv + SiLU, discretization, scan, SiLU(z) gate, output projection
// plus residual, then reversal along L when enabled.
TensorD lbvim_block(const TensorD& input, const BlockWeights& w, const BlockOptions& opt,
                    BlockCache* cache = nullptr);

// Gradient of the block given dL/d(output). Weight gradients are added into
// `grads` (which must have the weights' shapes); returns dL/d(input).
TensorD lbvim_block_backward(const BlockCache& cache, const BlockWeights& w,
                             const BlockOptions& opt, const TensorD& d_output,
                             BlockWeights& grads);

}  // namespace lbscan
