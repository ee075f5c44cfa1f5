// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

// Scalar reference for the full classifier, written independently of the
// library's embedding, pooling and head code. Blocks go through ref_block.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "lbscan/model.hpp"
#include "ref_block.hpp"

namespace lbscan::testing {

template <class R>
R ref_gelu(R v) {
  return R(0.5) * v * (R(1) + std::erf(v / std::sqrt(R(2))));
}

inline std::vector<std::size_t> ref_class_positions(const ModelConfig& c) {
  const std::size_t P = c.num_patches();
  switch (c.class_token) {
    case ClassToken::none: return {};
    case ClassToken::head: return {0};
    case ClassToken::middle: return {P / 2};
    case ClassToken::double_: return {0, P + 1};
  }
  return {};
}

// Backbone tokens (B, L, D) flattened, always in the original token order.
template <class R>
std::vector<R> ref_backbone(const Model& model, const TensorD& images) {
  const ModelConfig& c = model.config;
  const ModelWeights& w = model.weights;
  const std::size_t B = images.dim(0), D = c.embed_dim, P = c.num_patches(),
                    L = c.seq_len(), ps = c.patch_size, g = c.grid(), ch = c.channels;

  // Patch tokens, then class tokens spliced in at their positions.
  std::vector<std::vector<R>> patch(B * P, std::vector<R>(D));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t k = 0; k < D; ++k) {
        R acc = R(w.patch_b[k]);
        std::size_t f = 0;
        for (std::size_t r = 0; r < ps; ++r)
          for (std::size_t q = 0; q < ps; ++q)
            for (std::size_t cc = 0; cc < ch; ++cc, ++f) {
              acc += R(images(b, (p / g) * ps + r, (p % g) * ps + q, cc)) * R(w.patch_w(f, k));
            }
        patch[b * P + p][k] = acc;
      }
  const std::vector<std::size_t> cls_at = ref_class_positions(c);
  std::vector<R> x(B * L * D);
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t src = 0;
    for (std::size_t l = 0; l < L; ++l) {
      const auto it = std::find(cls_at.begin(), cls_at.end(), l);
      for (std::size_t k = 0; k < D; ++k) {
        const R v = it != cls_at.end() ? R(w.cls(std::size_t(it - cls_at.begin()), k))
                                       : patch[b * P + src][k];
        x[(b * L + l) * D + k] = v + R(w.pos(l, k));
      }
      if (it == cls_at.end()) ++src;
    }
  }

  const std::size_t M = c.effective_tile_len();
  const bool lbm = c.scan == Variant::lbm;
  const bool exp_disc = c.discretization == Discretization::exp;
  for (std::size_t u = 0; u < c.depth; ++u) {
    x = ref_block<R>(x, B, L, w.blocks[u], std::min(M, L), lbm, c.reverse, exp_disc);
  }
  if (c.reverse && c.depth % 2 == 1) {
    std::vector<R> y(x.size());
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t k = 0; k < D; ++k) y[(b * L + l) * D + k] = x[(b * L + L - 1 - l) * D + k];
    x.swap(y);
  }
  return x;
}

// Logits (B, C) flattened.
template <class R>
std::vector<R> ref_model(const Model& model, const TensorD& images) {
  const ModelConfig& c = model.config;
  const ModelWeights& w = model.weights;
  const std::size_t B = images.dim(0), D = c.embed_dim, L = c.seq_len();
  const std::vector<R> x = ref_backbone<R>(model, images);
  const std::vector<std::size_t> cls_at = ref_class_positions(c);
  auto tok = [&](std::size_t b, std::size_t l, std::size_t k) { return x[(b * L + l) * D + k]; };

  std::vector<R> pooled(B * D, R(0));
  for (std::size_t b = 0; b < B; ++b) {
    if (!cls_at.empty()) {
      for (std::size_t p : cls_at)
        for (std::size_t k = 0; k < D; ++k) pooled[b * D + k] += tok(b, p, k) / R(cls_at.size());
    } else if (c.head == HeadType::gap) {
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t k = 0; k < D; ++k) pooled[b * D + k] += tok(b, l, k) / R(L);
    } else {
      const std::size_t H = c.map_heads, hd = D / H;
      for (std::size_t h = 0; h < H; ++h) {
        std::vector<R> score(L), val(L * hd);
        for (std::size_t l = 0; l < L; ++l) {
          R s = 0;
          for (std::size_t j = h * hd; j < (h + 1) * hd; ++j) {
            R key = 0, v = 0;
            for (std::size_t k = 0; k < D; ++k) {
              key += tok(b, l, k) * R(w.head.wk(k, j));
              v += tok(b, l, k) * R(w.head.wv(k, j));
            }
            s += R(w.head.query[j]) * key;
            val[l * hd + (j - h * hd)] = v;
          }
          score[l] = s / std::sqrt(R(hd));
        }
        R total = 0;
        for (R& s : score) total += (s = std::exp(s));
        for (std::size_t l = 0; l < L; ++l)
          for (std::size_t j = 0; j < hd; ++j) {
            pooled[b * D + h * hd + j] += score[l] / total * val[l * hd + j];
          }
      }
    }
  }

  const std::size_t Hd = w.head.w1.dim(1), C = c.num_classes;
  std::vector<R> logits(B * C);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<R> act(Hd);
    for (std::size_t j = 0; j < Hd; ++j) {
      R a = R(w.head.b1[j]);
      for (std::size_t k = 0; k < D; ++k) a += pooled[b * D + k] * R(w.head.w1(k, j));
      act[j] = ref_gelu(a);
    }
    for (std::size_t o = 0; o < C; ++o) {
      R a = R(w.head.b2[o]);
      for (std::size_t j = 0; j < Hd; ++j) a += act[j] * R(w.head.w2(j, o));
      logits[b * C + o] = a;
    }
  }
  return logits;
}

}  // namespace lbscan::testing
