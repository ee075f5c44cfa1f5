// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lbscan/block.hpp"
#include "lbscan/config.hpp"

namespace lbscan {

// Classifier on a pooled (D) feature: D -> 4D (GELU) -> classes. The MAP
// head adds a learned query and key/value projections.
struct HeadWeights {
  TensorD w1;     // (D, 4D)
  TensorD b1;     // (4D)
  TensorD w2;     // (4D, C)
  TensorD b2;     // (C)
  TensorD query;  // (D), MAP only
  TensorD wk;     // (D, D), MAP only
  TensorD wv;     // (D, D), MAP only
};

struct ModelWeights {
  TensorD patch_w;  // (P, D) with P = patch * patch * channels
  TensorD patch_b;  // (D)
  TensorD cls;      // (tokens, D) when class tokens are used
  TensorD pos;      // (L, D) including class-token slots
  std::vector<BlockWeights> blocks;
  HeadWeights head;

  // All tensors present for `config`, zero-filled.
  static ModelWeights zeros(const ModelConfig& config);

  // Visits (name, tensor) in a fixed order; block tensors are named
  // "blocks.<u>.<field>" and head tensors "head.<field>". Absent optional
  // tensors are skipped.
  template <class F>
  void for_each(F&& f) { visit(*this, f); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f); }

  std::size_t num_params() const;

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f) {
    f(std::string("patch_w"), s.patch_w);
    f(std::string("patch_b"), s.patch_b);
    if (s.cls.size() > 0) f(std::string("cls"), s.cls);
    f(std::string("pos"), s.pos);
    for (std::size_t u = 0; u < s.blocks.size(); ++u) {
      const std::string prefix = "blocks." + std::to_string(u) + ".";
      s.blocks[u].for_each([&](const char* name, auto& t) { f(prefix + name, t); });
    }
    f(std::string("head.w1"), s.head.w1);
    f(std::string("head.b1"), s.head.b1);
    f(std::string("head.w2"), s.head.w2);
    f(std::string("head.b2"), s.head.b2);
    if (s.head.query.size() > 0) {
      f(std::string("head.query"), s.head.query);
      f(std::string("head.wk"), s.head.wk);
      f(std::string("head.wv"), s.head.wv);
    }
  }
};

// Deterministic initialization; all values are float-representable.
ModelWeights init_model_weights(const ModelConfig& config, std::uint64_t seed);

struct Model {
  ModelConfig config;
  ModelWeights weights;
};

Model make_model(const ModelConfig& config, std::uint64_t seed);

// Token positions of the class token(s) in a sequence of `num_patches`
// patches: head -> {0}, middle -> {P/2}, double -> {0, P+1}.
std::vector<std::size_t> class_token_positions(ClassToken mode, std::size_t num_patches);

// Images (B, H, W, C) -> patch vectors (B, P, patch*patch*C), patches in
// row-major grid order, each flattened as (row, col, channel).
TensorD extract_patches(const TensorD& images, std::size_t patch_size);

// Linear patch projection without positional embedding: (B, P, D).
TensorD project_patches(const TensorD& images, const ModelConfig& config,
                        const ModelWeights& w);

// Inserts the learned token rows of `cls` at the positions for `mode`.
TensorD insert_class_token(const TensorD& tokens, ClassToken mode, const TensorD& cls);

// Patch projection, class tokens, positional embedding: (B, L, D).
TensorD patch_embed(const TensorD& images, const ModelConfig& config, const ModelWeights& w);

struct BackboneOutput {
  TensorD tokens;         // (B, L, D)
  bool reversed = false;  // true when the tokens are in reversed order
};

struct ModelCache {
  TensorD patches;  // (B, P, patch_dim)
  std::vector<BlockCache> blocks;
  bool reversed = false;
  TensorD tokens;   // backbone output
  // Head intermediates.
  TensorD pooled;   // (B, D)
  TensorD hidden;   // (B, 4D) before GELU
  TensorD keys;     // (B, L, D), MAP
  TensorD values;   // (B, L, D), MAP
  TensorD attn;     // (B, H, L), MAP
};

// U blocks. When the block count is odd and reversal is on, the final
// sequence is reversed; restore_order undoes that.
BackboneOutput backbone(const TensorD& images, const Model& model, std::size_t workers = 1,
                        ModelCache* cache = nullptr);

// Mean over tokens, then MLP.
TensorD head_gap(const TensorD& tokens, const HeadWeights& w);
// Single learned query, multi-head softmax(q K^T / sqrt(d)) pooling of V,
// then MLP. `attention` receives (B, heads, L) weights when non-null.
TensorD head_map(const TensorD& tokens, const HeadWeights& w, std::size_t heads,
                 TensorD* attention = nullptr);

// Full classifier: (B, H, W, C) -> logits (B, classes).
TensorD model_forward(const Model& model, const TensorD& images, std::size_t workers = 1,
                      ModelCache* cache = nullptr);

struct ModelGrads {
  ModelWeights weights;
  TensorD images;  // filled when requested
};

// Gradients of a scalar loss given dL/dlogits, from a cached forward pass.
ModelGrads model_backward(const Model& model, const ModelCache& cache, const TensorD& d_logits,
                          std::size_t workers = 1, bool image_grad = false);

// Gradients given dL/d(backbone tokens) in the orientation backbone()
// returned them. Head weights receive zero gradient.
ModelGrads backbone_backward(const Model& model, const ModelCache& cache,
                             const TensorD& d_tokens, std::size_t workers = 1,
                             bool image_grad = true);

}  // namespace lbscan
