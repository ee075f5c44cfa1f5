// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/erf.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "lbscan/errors.hpp"

namespace lbscan::erf {
namespace {

// Position of original-order token `token` in the backbone output.
std::size_t output_index(const BackboneOutput& out, std::size_t token) {
  return out.reversed ? out.tokens.dim(1) - 1 - token : token;
}

}  // namespace

std::size_t center_token(const ModelConfig& c) {
  const std::size_t g = c.grid();
  const std::size_t patch = (g / 2) * g + g / 2;
  std::size_t index = patch;
  for (std::size_t p : class_token_positions(c.class_token, c.num_patches())) {
    if (p <= index) ++index;
  }
  return index;
}

ErfMap compute_erf(const Model& model, const TensorD& images, std::size_t workers) {
  return compute_erf(model, images, center_token(model.config), workers);
}

ErfMap compute_erf(const Model& model, const TensorD& images, std::size_t token,
                   std::size_t workers) {
  const ModelConfig& c = model.config;
  if (token >= c.seq_len()) throw RangeError("ERF token index out of range");
  ModelCache cache;
  const BackboneOutput out = backbone(images, model, workers, &cache);
  const std::size_t B = out.tokens.dim(0), D = out.tokens.dim(2);
  const std::size_t at = output_index(out, token);
  TensorD d(out.tokens.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < D; ++k) d(b, at, k) = 2.0 * out.tokens(b, at, k);
  const TensorD g = backbone_backward(model, cache, d, workers, true).images;

  const std::size_t H = c.image_size, W = c.image_size, C = c.channels;
  ErfMap map{TensorD({H, W}), TensorD({H, W}), token};
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        for (std::size_t ch = 0; ch < C; ++ch) map.raw(y, x) += std::abs(g(b, y, x, ch));
  for (double& v : map.raw.storage()) v /= static_cast<double>(B);
  const double top = *std::max_element(map.raw.data().begin(), map.raw.data().end());
  if (top > 0.0) {
    for (std::size_t i = 0; i < map.raw.size(); ++i) map.heat[i] = map.raw[i] / top;
  }
  return map;
}

double erf_objective(const Model& model, const TensorD& images, std::size_t token,
                     std::size_t workers) {
  const BackboneOutput out = backbone(images, model, workers);
  const std::size_t at = output_index(out, token);
  double s = 0.0;
  for (std::size_t b = 0; b < out.tokens.dim(0); ++b)
    for (std::size_t k = 0; k < out.tokens.dim(2); ++k) {
      s += out.tokens(b, at, k) * out.tokens(b, at, k);
    }
  return s;
}

std::string to_pgm(const TensorD& heat) {
  if (heat.rank() != 2) throw ShapeError("heatmap must be (H, W)");
  std::string out = fmt::format("P5\n{} {}\n255\n", heat.dim(1), heat.dim(0));
  for (double v : heat.data()) {
    const double level = std::round(255.0 * std::clamp(v, 0.0, 1.0));
    out.push_back(static_cast<char>(static_cast<unsigned char>(level)));
  }
  return out;
}

std::string to_csv(const TensorD& heat) {
  if (heat.rank() != 2) throw ShapeError("heatmap must be (H, W)");
  std::string out;
  for (std::size_t y = 0; y < heat.dim(0); ++y) {
    for (std::size_t x = 0; x < heat.dim(1); ++x) {
      out += fmt::format("{}{:.9g}", x == 0 ? "" : ",", heat(y, x));
    }
    out += '\n';
  }
  return out;
}

}  // namespace lbscan::erf
