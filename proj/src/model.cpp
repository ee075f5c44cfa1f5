// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lbscan/errors.hpp"
#include "linalg.hpp"

namespace lbscan {
namespace {

using detail::mat;
using detail::vec;

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void fill_uniform(TensorD& t, Rng& rng, double bound) {
  for (double& v : t.storage()) v = round_f32(rng.uniform(-bound, bound));
}

void fill_normal(TensorD& t, Rng& rng, double sd) {
  for (double& v : t.storage()) v = round_f32(rng.normal(0.0, sd));
}

// Positions of class tokens after the backbone, in its output orientation.
std::vector<std::size_t> read_positions(const ModelConfig& c, bool reversed) {
  std::vector<std::size_t> pos = class_token_positions(c.class_token, c.num_patches());
  if (reversed) {
    for (std::size_t& p : pos) p = c.seq_len() - 1 - p;
  }
  return pos;
}

// Mean over L. Tokens l and L-1-l are added first, so the result is
// bitwise identical for a sequence and its reversal.
TensorD mean_tokens(const TensorD& tokens) {
  const std::size_t B = tokens.dim(0), L = tokens.dim(1), D = tokens.dim(2);
  TensorD pooled({B, D});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t l = 0; l < L / 2; ++l)
      for (std::size_t k = 0; k < D; ++k) {
        pooled(b, k) += tokens(b, l, k) + tokens(b, L - 1 - l, k);
      }
    if (L % 2 == 1)
      for (std::size_t k = 0; k < D; ++k) pooled(b, k) += tokens(b, L / 2, k);
    for (std::size_t k = 0; k < D; ++k) pooled(b, k) /= static_cast<double>(L);
  }
  return pooled;
}

// MLP forward on pooled (B, D); keeps the pre-activation.
TensorD mlp_forward(const TensorD& pooled, const HeadWeights& w, TensorD& hidden) {
  const std::size_t B = pooled.dim(0), H = w.w1.dim(1), C = w.w2.dim(1);
  hidden = TensorD({B, H});
  mat(hidden) = mat(pooled) * mat(w.w1);
  mat(hidden).rowwise() += vec(w.b1).transpose();
  TensorD act({B, H});
  for (std::size_t i = 0; i < act.size(); ++i) act[i] = detail::gelu(hidden[i]);
  TensorD logits({B, C});
  mat(logits) = mat(act) * mat(w.w2);
  mat(logits).rowwise() += vec(w.b2).transpose();
  return logits;
}

// Returns dL/d(pooled).
TensorD mlp_backward(const TensorD& pooled, const TensorD& hidden, const HeadWeights& w,
                     const TensorD& d_logits, HeadWeights& g) {
  const std::size_t B = pooled.dim(0), H = w.w1.dim(1);
  TensorD act({B, H});
  for (std::size_t i = 0; i < act.size(); ++i) act[i] = detail::gelu(hidden[i]);
  mat(g.w2) += mat(act).transpose() * mat(d_logits);
  vec(g.b2) += mat(d_logits).colwise().sum().transpose();
  TensorD d_hidden({B, H});
  mat(d_hidden) = mat(d_logits) * mat(w.w2).transpose();
  for (std::size_t i = 0; i < d_hidden.size(); ++i) d_hidden[i] *= detail::gelu_grad(hidden[i]);
  mat(g.w1) += mat(pooled).transpose() * mat(d_hidden);
  vec(g.b1) += mat(d_hidden).colwise().sum().transpose();
  TensorD d_pooled({B, pooled.dim(1)});
  mat(d_pooled) = mat(d_hidden) * mat(w.w1).transpose();
  return d_pooled;
}

TensorD map_pool(const TensorD& tokens, const HeadWeights& w, std::size_t heads,
                 TensorD& keys, TensorD& values, TensorD& attn) {
  const std::size_t B = tokens.dim(0), L = tokens.dim(1), D = tokens.dim(2);
  const std::size_t hd = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  keys = TensorD({B, L, D});
  values = TensorD({B, L, D});
  mat(keys) = mat(tokens) * mat(w.wk);
  mat(values) = mat(tokens) * mat(w.wv);
  attn = TensorD({B, heads, L});
  TensorD pooled({B, D});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < heads; ++h) {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < L; ++l) {
        double s = 0.0;
        for (std::size_t j = h * hd; j < (h + 1) * hd; ++j) s += w.query[j] * keys(b, l, j);
        attn(b, h, l) = s * scale;
        top = std::max(top, attn(b, h, l));
      }
      double total = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        attn(b, h, l) = std::exp(attn(b, h, l) - top);
        total += attn(b, h, l);
      }
      for (std::size_t l = 0; l < L; ++l) attn(b, h, l) /= total;
      for (std::size_t j = h * hd; j < (h + 1) * hd; ++j) {
        double acc = 0.0;
        for (std::size_t l = 0; l < L; ++l) acc += attn(b, h, l) * values(b, l, j);
        pooled(b, j) = acc;
      }
    }
  return pooled;
}

TensorD map_pool_backward(const TensorD& tokens, const HeadWeights& w, std::size_t heads,
                          const ModelCache& c, const TensorD& d_pooled, HeadWeights& g) {
  const std::size_t B = tokens.dim(0), L = tokens.dim(1), D = tokens.dim(2);
  const std::size_t hd = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  TensorD dk({B, L, D}), dv({B, L, D});
  std::vector<double> da(L);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < heads; ++h) {
      double mean = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        double s = 0.0;
        for (std::size_t j = h * hd; j < (h + 1) * hd; ++j) {
          s += d_pooled(b, j) * c.values(b, l, j);
          dv(b, l, j) = c.attn(b, h, l) * d_pooled(b, j);
        }
        da[l] = s;
        mean += c.attn(b, h, l) * s;
      }
      for (std::size_t l = 0; l < L; ++l) {
        const double ds = c.attn(b, h, l) * (da[l] - mean) * scale;
        for (std::size_t j = h * hd; j < (h + 1) * hd; ++j) {
          g.query[j] += ds * c.keys(b, l, j);
          dk(b, l, j) = ds * w.query[j];
        }
      }
    }
  mat(g.wk) += mat(tokens).transpose() * mat(dk);
  mat(g.wv) += mat(tokens).transpose() * mat(dv);
  TensorD d_tokens({B, L, D});
  mat(d_tokens) = mat(dk) * mat(w.wk).transpose() + mat(dv) * mat(w.wv).transpose();
  return d_tokens;
}

void require_images(const TensorD& images, const ModelConfig& c) {
  if (images.rank() != 4 || images.dim(1) != c.image_size || images.dim(2) != c.image_size ||
      images.dim(3) != c.channels) {
    throw ShapeError("images must be (B, " + std::to_string(c.image_size) + ", " +
                     std::to_string(c.image_size) + ", " + std::to_string(c.channels) +
                     "), got " + shape_str(images.shape()));
  }
}

}  // namespace

ModelWeights ModelWeights::zeros(const ModelConfig& c) {
  c.validate();
  const std::size_t D = c.embed_dim;
  ModelWeights w;
  w.patch_w = TensorD({c.patch_dim(), D});
  w.patch_b = TensorD({D});
  if (c.num_class_tokens() > 0) w.cls = TensorD({c.num_class_tokens(), D});
  w.pos = TensorD({c.seq_len(), D});
  for (std::size_t u = 0; u < c.depth; ++u) {
    w.blocks.push_back(BlockWeights::zeros(D, c.inner_dim, c.state_dim, c.conv_kernel));
  }
  w.head.w1 = TensorD({D, 4 * D});
  w.head.b1 = TensorD({4 * D});
  w.head.w2 = TensorD({4 * D, c.num_classes});
  w.head.b2 = TensorD({c.num_classes});
  if (c.head == HeadType::map && c.class_token == ClassToken::none) {
    w.head.query = TensorD({D});
    w.head.wk = TensorD({D, D});
    w.head.wv = TensorD({D, D});
  }
  return w;
}

std::size_t ModelWeights::num_params() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const TensorD& t) { n += t.size(); });
  return n;
}

ModelWeights init_model_weights(const ModelConfig& c, std::uint64_t seed) {
  ModelWeights w = ModelWeights::zeros(c);
  Rng rng(seed);
  const std::size_t D = c.embed_dim;
  fill_uniform(w.patch_w, rng, 1.0 / std::sqrt(static_cast<double>(c.patch_dim())));
  if (w.cls.size() > 0) fill_normal(w.cls, rng, 0.02);
  fill_normal(w.pos, rng, 0.02);
  for (BlockWeights& bw : w.blocks) {
    bw = init_block_weights(D, c.inner_dim, c.state_dim, c.conv_kernel, rng);
  }
  fill_uniform(w.head.w1, rng, 1.0 / std::sqrt(static_cast<double>(D)));
  fill_uniform(w.head.w2, rng, 1.0 / std::sqrt(static_cast<double>(4 * D)));
  if (w.head.query.size() > 0) {
    fill_normal(w.head.query, rng, 0.02);
    fill_uniform(w.head.wk, rng, 1.0 / std::sqrt(static_cast<double>(D)));
    fill_uniform(w.head.wv, rng, 1.0 / std::sqrt(static_cast<double>(D)));
  }
  return w;
}

Model make_model(const ModelConfig& config, std::uint64_t seed) {
  return Model{config, init_model_weights(config, seed)};
}

std::vector<std::size_t> class_token_positions(ClassToken mode, std::size_t num_patches) {
  switch (mode) {
    case ClassToken::none:
      return {};
    case ClassToken::head:
      return {0};
    case ClassToken::middle:
      return {num_patches / 2};
    case ClassToken::double_:
      return {0, num_patches + 1};
  }
  return {};
}

TensorD extract_patches(const TensorD& images, std::size_t patch_size) {
  if (images.rank() != 4) throw ShapeError("images must be (B, H, W, C)");
  const std::size_t B = images.dim(0), H = images.dim(1), W = images.dim(2),
                    C = images.dim(3);
  if (patch_size == 0 || H % patch_size != 0 || W % patch_size != 0) {
    throw ShapeError("image " + std::to_string(H) + "x" + std::to_string(W) +
                     " is not divisible into " + std::to_string(patch_size) + "-pixel patches");
  }
  const std::size_t gh = H / patch_size, gw = W / patch_size;
  const std::size_t pd = patch_size * patch_size * C;
  TensorD out({B, gh * gw, pd});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t py = 0; py < gh; ++py)
      for (std::size_t px = 0; px < gw; ++px) {
        double* dst = &out(b, py * gw + px, 0);
        for (std::size_t r = 0; r < patch_size; ++r)
          for (std::size_t q = 0; q < patch_size; ++q)
            for (std::size_t ch = 0; ch < C; ++ch) {
              *dst++ = images(b, py * patch_size + r, px * patch_size + q, ch);
            }
      }
  return out;
}

TensorD project_patches(const TensorD& images, const ModelConfig& c, const ModelWeights& w) {
  require_images(images, c);
  const TensorD patches = extract_patches(images, c.patch_size);
  TensorD tokens({images.dim(0), c.num_patches(), c.embed_dim});
  mat(tokens) = mat(patches) * mat(w.patch_w);
  mat(tokens).rowwise() += vec(w.patch_b).transpose();
  return tokens;
}

TensorD insert_class_token(const TensorD& tokens, ClassToken mode, const TensorD& cls) {
  const std::size_t B = tokens.dim(0), P = tokens.dim(1), D = tokens.dim(2);
  const std::vector<std::size_t> pos = class_token_positions(mode, P);
  if (pos.empty()) return tokens;
  require_shape(cls.shape(), {pos.size(), D}, "class tokens");
  const std::size_t L = P + pos.size();
  TensorD out({B, L, D});
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t src = 0, k = 0;
    for (std::size_t l = 0; l < L; ++l) {
      const double* from = k < pos.size() && pos[k] == l ? &cls(k++, 0) : &tokens(b, src++, 0);
      std::copy(from, from + D, &out(b, l, 0));
    }
  }
  return out;
}

TensorD patch_embed(const TensorD& images, const ModelConfig& c, const ModelWeights& w) {
  TensorD x = insert_class_token(project_patches(images, c, w), c.class_token, w.cls);
  for (std::size_t b = 0; b < x.dim(0); ++b) {
    for (std::size_t i = 0; i < w.pos.size(); ++i) x[b * w.pos.size() + i] += w.pos[i];
  }
  return x;
}

BackboneOutput backbone(const TensorD& images, const Model& model, std::size_t workers,
                        ModelCache* cache) {
  const ModelConfig& c = model.config;
  const BlockOptions opt = BlockOptions::from_config(c, workers);
  BackboneOutput out;
  out.tokens = patch_embed(images, c, model.weights);
  if (cache) {
    cache->patches = extract_patches(images, c.patch_size);
    cache->blocks.assign(c.depth, BlockCache{});
  }
  for (std::size_t u = 0; u < c.depth; ++u) {
    out.tokens = lbvim_block(out.tokens, model.weights.blocks[u], opt,
                             cache ? &cache->blocks[u] : nullptr);
  }
  out.reversed = c.reverse && c.depth % 2 == 1;
  if (out.reversed && c.restore_order) {
    out.tokens = reverse_seq(out.tokens);
    out.reversed = false;
  }
  if (cache) {
    cache->reversed = out.reversed;
    cache->tokens = out.tokens;
  }
  return out;
}

TensorD head_gap(const TensorD& tokens, const HeadWeights& w) {
  TensorD hidden;
  return mlp_forward(mean_tokens(tokens), w, hidden);
}

TensorD head_map(const TensorD& tokens, const HeadWeights& w, std::size_t heads,
                 TensorD* attention) {
  if (heads == 0 || tokens.dim(2) % heads != 0) {
    throw ShapeError("MAP head: embed dim must be divisible by the head count");
  }
  TensorD keys, values, attn, hidden;
  const TensorD pooled = map_pool(tokens, w, heads, keys, values, attn);
  if (attention) *attention = attn;
  return mlp_forward(pooled, w, hidden);
}

TensorD model_forward(const Model& model, const TensorD& images, std::size_t workers,
                      ModelCache* cache) {
  const ModelConfig& c = model.config;
  const HeadWeights& hw = model.weights.head;
  ModelCache local;
  ModelCache& mc = cache ? *cache : local;
  const BackboneOutput bb = backbone(images, model, workers, &mc);
  const TensorD& tokens = bb.tokens;
  const std::size_t B = tokens.dim(0), D = tokens.dim(2);

  mc.pooled = TensorD({B, D});
  if (c.class_token != ClassToken::none) {
    const std::vector<std::size_t> pos = read_positions(c, bb.reversed);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t p : pos)
        for (std::size_t k = 0; k < D; ++k) {
          mc.pooled(b, k) += tokens(b, p, k) / static_cast<double>(pos.size());
        }
  } else if (c.head == HeadType::gap) {
    mc.pooled = mean_tokens(tokens);
  } else {
    mc.pooled = map_pool(tokens, hw, c.map_heads, mc.keys, mc.values, mc.attn);
  }
  return mlp_forward(mc.pooled, hw, mc.hidden);
}

ModelGrads backbone_backward(const Model& model, const ModelCache& mc, const TensorD& d_tokens,
                             std::size_t workers, bool image_grad) {
  const ModelConfig& c = model.config;
  const ModelWeights& w = model.weights;
  const BlockOptions opt = BlockOptions::from_config(c, workers);
  require_shape(d_tokens.shape(), mc.tokens.shape(), "d_tokens");
  ModelGrads g{ModelWeights::zeros(c), TensorD()};

  const bool restored = c.reverse && c.depth % 2 == 1 && c.restore_order;
  TensorD d = restored ? reverse_seq(d_tokens) : d_tokens;
  for (std::size_t u = c.depth; u-- > 0;) {
    d = lbvim_block_backward(mc.blocks[u], w.blocks[u], opt, d, g.weights.blocks[u]);
  }

  // Positional embedding, class tokens, patch projection.
  const std::size_t B = d.dim(0), L = d.dim(1), D = d.dim(2), P = c.num_patches();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < L * D; ++i) g.weights.pos[i] += d[b * L * D + i];
  const std::vector<std::size_t> pos = class_token_positions(c.class_token, P);
  TensorD d_patch_tokens({B, P, D});
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t dst = 0, k = 0;
    for (std::size_t l = 0; l < L; ++l) {
      double* to = k < pos.size() && pos[k] == l ? &g.weights.cls(k++, 0) : &d_patch_tokens(b, dst++, 0);
      for (std::size_t j = 0; j < D; ++j) to[j] += d(b, l, j);
    }
  }
  mat(g.weights.patch_w) += mat(mc.patches).transpose() * mat(d_patch_tokens);
  vec(g.weights.patch_b) += mat(d_patch_tokens).colwise().sum().transpose();

  if (image_grad) {
    TensorD d_patches({B, P, c.patch_dim()});
    mat(d_patches) = mat(d_patch_tokens) * mat(w.patch_w).transpose();
    const std::size_t ps = c.patch_size, gw = c.grid(), C = c.channels;
    g.images = TensorD({B, c.image_size, c.image_size, C});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t p = 0; p < P; ++p) {
        const double* src = &d_patches(b, p, 0);
        const std::size_t py = p / gw, px = p % gw;
        for (std::size_t r = 0; r < ps; ++r)
          for (std::size_t q = 0; q < ps; ++q)
            for (std::size_t ch = 0; ch < C; ++ch) {
              g.images(b, py * ps + r, px * ps + q, ch) = *src++;
            }
      }
  }
  return g;
}

ModelGrads model_backward(const Model& model, const ModelCache& mc, const TensorD& d_logits,
                          std::size_t workers, bool image_grad) {
  const ModelConfig& c = model.config;
  const HeadWeights& hw = model.weights.head;
  HeadWeights hg = ModelWeights::zeros(c).head;
  const TensorD d_pooled = mlp_backward(mc.pooled, mc.hidden, hw, d_logits, hg);

  const TensorD& tokens = mc.tokens;
  const std::size_t B = tokens.dim(0), L = tokens.dim(1), D = tokens.dim(2);
  TensorD d_tokens({B, L, D});
  if (c.class_token != ClassToken::none) {
    const std::vector<std::size_t> pos = read_positions(c, mc.reversed);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t p : pos)
        for (std::size_t k = 0; k < D; ++k) {
          d_tokens(b, p, k) += d_pooled(b, k) / static_cast<double>(pos.size());
        }
  } else if (c.head == HeadType::gap) {
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t k = 0; k < D; ++k) {
          d_tokens(b, l, k) = d_pooled(b, k) / static_cast<double>(L);
        }
  } else {
    d_tokens = map_pool_backward(tokens, hw, c.map_heads, mc, d_pooled, hg);
  }

  ModelGrads g = backbone_backward(model, mc, d_tokens, workers, image_grad);
  g.weights.head = std::move(hg);
  return g;
}

}  // namespace lbscan
