// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/block.hpp"

#include <algorithm>
#include <cmath>

#include "lbscan/engine.hpp"
#include "lbscan/errors.hpp"
#include "lbscan/scan_grad.hpp"
#include "linalg.hpp"

namespace lbscan {
namespace {

using detail::mat;
using detail::vec;

constexpr double kRmsEps = 1e-6;

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

TensorD uniform_f32(Rng& rng, Shape shape, double bound) {
  TensorD t(std::move(shape));
  for (double& v : t.storage()) v = round_f32(rng.uniform(-bound, bound));
  return t;
}

// A = -exp(a_log), (E, N).
TensorD negative_a(const BlockWeights& w) {
  TensorD a(w.a_log.shape());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = -std::exp(w.a_log[i]);
  return a;
}

struct Coefficients {
  TensorD delta_pre;
  TensorD delta;
  TensorD bm;
  ScanParams<double> scan;
};

Coefficients compute_coefficients(const TensorD& x, const BlockWeights& w,
                                  Discretization mode) {
  if (x.rank() != 3) throw ShapeError("discretize: x must be (B, L, E), got " + shape_str(x.shape()));
  const std::size_t B = x.dim(0), L = x.dim(1), E = x.dim(2), N = w.state_dim();
  if (E != w.inner_dim()) {
    throw ShapeError("discretize: x has " + std::to_string(E) + " channels, weights expect " +
                     std::to_string(w.inner_dim()));
  }
  x.check_finite("x");

  Coefficients out;
  out.delta_pre = TensorD({B, L, E});
  mat(out.delta_pre) = mat(x) * mat(w.w_delta);
  mat(out.delta_pre).rowwise() += vec(w.delta_bias).transpose();
  out.delta_pre.check_finite("delta_pre");
  out.delta = TensorD({B, L, E});
  for (std::size_t i = 0; i < out.delta.size(); ++i) {
    out.delta[i] = detail::softplus(out.delta_pre[i]);
  }

  out.bm = TensorD({B, L, N});
  mat(out.bm) = mat(x) * mat(w.w_b);
  out.bm.check_finite("B");
  ScanParams<double>& p = out.scan;
  p.c = TensorD({B, L, N});
  mat(p.c) = mat(x) * mat(w.w_c);
  p.c.check_finite("C");

  const TensorD a_mat = negative_a(w);
  p.abar = TensorD({B, L, E, N});
  p.bx = TensorD({B, L, E, N});
  p.dx = TensorD({B, L, E});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t e = 0; e < E; ++e) {
        const double dt = out.delta(b, t, e);
        const double xv = x(b, t, e);
        const double dtx = dt * xv;
        p.dx(b, t, e) = w.d[e] * xv;
        double* ab = &p.abar(b, t, e, 0);
        double* bb = &p.bx(b, t, e, 0);
        const double* a_row = &a_mat(e, 0);
        for (std::size_t n = 0; n < N; ++n) {
          const double a = a_row[n];
          ab[n] = mode == Discretization::exp ? std::exp(dt * a) : dt * a;
          bb[n] = dtx * out.bm(b, t, n);
        }
      }
  p.abar.check_finite("abar");
  p.bx.check_finite("bx");
  p.dx.check_finite("dx");
  return out;
}

TensorD run_scan(const ScanParams<double>& p, const BlockOptions& opt) {
  const std::size_t L = p.abar.dim(1);
  const engine::TilePlan plan = engine::TilePlan::make(L, opt.tile_for(L));
  const engine::ScanEngine eng(opt.workers);
  if (opt.precision == Precision::single_) {
    const ScanParams<float> pf = p.cast<float>();
    const ScanOutput<float> out =
        opt.scan == Variant::lbm ? eng.lbm(pf, plan) : eng.forward(pf, plan);
    return out.y.cast<double>();
  }
  return opt.scan == Variant::lbm ? eng.lbm(p, plan).y : eng.forward(p, plan).y;
}

}  // namespace

BlockWeights BlockWeights::zeros(std::size_t embed, std::size_t inner, std::size_t state,
                                 std::size_t kernel) {
  BlockWeights w;
  w.norm_scale = TensorD({embed});
  w.w_x = TensorD({embed, inner});
  w.w_z = TensorD({embed, inner});
  w.conv = TensorD({inner, kernel});
  w.w_b = TensorD({inner, state});
  w.w_c = TensorD({inner, state});
  w.w_delta = TensorD({inner, inner});
  w.delta_bias = TensorD({inner});
  w.a_log = TensorD({inner, state});
  w.d = TensorD({inner});
  w.w_out = TensorD({inner, embed});
  return w;
}

void BlockWeights::validate() const {
  if (w_x.rank() != 2 || w_b.rank() != 2 || conv.rank() != 2) {
    throw ShapeError("block weights: projections must be rank 2");
  }
  const std::size_t D = embed_dim(), E = inner_dim(), N = state_dim(), K = kernel();
  if (K < 1) throw ShapeError("block weights: conv kernel width must be >= 1");
  require_shape(norm_scale.shape(), {D}, "norm_scale");
  require_shape(w_z.shape(), {D, E}, "w_z");
  require_shape(conv.shape(), {E, K}, "conv");
  require_shape(w_c.shape(), {E, N}, "w_c");
  require_shape(w_delta.shape(), {E, E}, "w_delta");
  require_shape(delta_bias.shape(), {E}, "delta_bias");
  require_shape(a_log.shape(), {E, N}, "a_log");
  require_shape(d.shape(), {E}, "d");
  require_shape(w_out.shape(), {E, D}, "w_out");
  for_each([](const char* name, const TensorD& t) { t.check_finite(name); });
}

BlockWeights init_block_weights(std::size_t embed, std::size_t inner, std::size_t state,
                                std::size_t kernel, Rng& rng) {
  BlockWeights w = BlockWeights::zeros(embed, inner, state, kernel);
  w.norm_scale.fill(1.0);
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(embed));
  const double inner_bound = 1.0 / std::sqrt(static_cast<double>(inner));
  w.w_x = uniform_f32(rng, {embed, inner}, in_bound);
  w.w_z = uniform_f32(rng, {embed, inner}, in_bound);
  w.conv = uniform_f32(rng, {inner, kernel}, 1.0 / std::sqrt(static_cast<double>(kernel)));
  w.w_b = uniform_f32(rng, {inner, state}, inner_bound);
  w.w_c = uniform_f32(rng, {inner, state}, inner_bound);
  w.w_delta = uniform_f32(rng, {inner, inner}, inner_bound);
  for (std::size_t e = 0; e < inner; ++e) {
    const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
    // Inverse softplus.
    w.delta_bias[e] = round_f32(dt + std::log(-std::expm1(-dt)));
    for (std::size_t n = 0; n < state; ++n) {
      w.a_log(e, n) = round_f32(std::log(static_cast<double>(n + 1)));
    }
  }
  w.d.fill(1.0);
  w.w_out = uniform_f32(rng, {inner, embed}, inner_bound);
  return w;
}

BlockOptions BlockOptions::from_config(const ModelConfig& config, std::size_t workers) {
  BlockOptions o;
  o.tile_len = config.tile_len;
  o.scan = config.scan;
  o.discretization = config.discretization;
  o.precision = config.scan_precision;
  o.reverse = config.reverse;
  o.workers = workers;
  return o;
}

std::size_t BlockOptions::tile_for(std::size_t length) const {
  const std::size_t m = tile_len == 0 ? engine::select_tile_len(length) : tile_len;
  return std::min(m, std::max<std::size_t>(length, 1));
}

ScanParams<double> discretize(const TensorD& x, const BlockWeights& w, Discretization mode) {
  return compute_coefficients(x, w, mode).scan;
}

TensorD lbvim_block(const TensorD& input, const BlockWeights& w, const BlockOptions& opt,
                    BlockCache* cache) {
  if (input.rank() != 3 || input.dim(2) != w.embed_dim()) {
    throw ShapeError("block input must be (B, L, " + std::to_string(w.embed_dim()) + "), got " +
                     shape_str(input.shape()));
  }
  if (opt.scan != Variant::lbm && opt.scan != Variant::forward) {
    throw std::invalid_argument("block scan must be lbm or forward");
  }
  input.check_finite("block input");
  const std::size_t B = input.dim(0), L = input.dim(1), D = w.embed_dim(),
                    E = w.inner_dim(), K = w.kernel();

  BlockCache local;
  BlockCache& c = cache ? *cache : local;
  c.input = input;

  // RMS norm.
  c.inv_rms = TensorD({B, L});
  c.normed = TensorD({B, L, D});
  for (std::size_t r = 0; r < B * L; ++r) {
    const double* x = input.ptr() + r * D;
    double ss = 0.0;
    for (std::size_t k = 0; k < D; ++k) ss += x[k] * x[k];
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(D) + kRmsEps);
    c.inv_rms[r] = inv;
    for (std::size_t k = 0; k < D; ++k) c.normed[r * D + k] = x[k] * inv;
  }
  TensorD scaled({B, L, D});
  mat(scaled) = mat(c.normed) * vec(w.norm_scale).asDiagonal();

  c.xp = TensorD({B, L, E});
  c.z = TensorD({B, L, E});
  mat(c.xp) = mat(scaled) * mat(w.w_x);
  mat(c.z) = mat(scaled) * mat(w.w_z);

  // Causal depthwise conv, then SiLU.
  c.xc = TensorD({B, L, E});
  c.xs = TensorD({B, L, E});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t e = 0; e < E; ++e) {
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          const std::size_t back = K - 1 - k;
          if (back <= t) acc += w.conv(e, k) * c.xp(b, t - back, e);
        }
        c.xc(b, t, e) = acc;
        c.xs(b, t, e) = detail::silu(acc);
      }

  Coefficients coef = compute_coefficients(c.xs, w, opt.discretization);
  c.delta_pre = std::move(coef.delta_pre);
  c.delta = std::move(coef.delta);
  c.bm = std::move(coef.bm);
  c.scan = std::move(coef.scan);
  c.y = run_scan(c.scan, opt);

  c.gated = TensorD({B, L, E});
  for (std::size_t i = 0; i < c.gated.size(); ++i) c.gated[i] = c.y[i] * detail::silu(c.z[i]);

  TensorD out({B, L, D});
  mat(out) = mat(input) + mat(c.gated) * mat(w.w_out);
  return opt.reverse ? reverse_seq(out) : out;
}

TensorD lbvim_block_backward(const BlockCache& c, const BlockWeights& w,
                             const BlockOptions& opt, const TensorD& d_output,
                             BlockWeights& g) {
  const std::size_t B = c.input.dim(0), L = c.input.dim(1), D = w.embed_dim(),
                    E = w.inner_dim(), N = w.state_dim(), K = w.kernel();
  require_shape(d_output.shape(), c.input.shape(), "d_output");
  const TensorD d_out = opt.reverse ? reverse_seq(d_output) : d_output;

  // Residual and output projection.
  TensorD d_in = d_out;
  mat(g.w_out) += mat(c.gated).transpose() * mat(d_out);
  TensorD d_gated({B, L, E});
  mat(d_gated) = mat(d_out) * mat(w.w_out).transpose();

  // Gate.
  TensorD dy({B, L, E}), dz({B, L, E});
  for (std::size_t i = 0; i < dy.size(); ++i) {
    dy[i] = d_gated[i] * detail::silu(c.z[i]);
    dz[i] = d_gated[i] * c.y[i] * detail::silu_grad(c.z[i]);
  }

  // Scan.
  const autodiff::ScanGrads sg =
      opt.scan == Variant::lbm
          ? autodiff::lbm_scan_grad(c.scan, dy, opt.tile_for(L), opt.workers)
          : autodiff::forward_scan_grad(c.scan, dy, opt.workers);

  // Discretization.
  const TensorD a_mat = negative_a(w);
  TensorD dxs({B, L, E}), d_delta({B, L, E}), dbm({B, L, N});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t e = 0; e < E; ++e) {
        const double dt = c.delta(b, t, e);
        const double xv = c.xs(b, t, e);
        const double ddx = sg.dx(b, t, e);
        g.d[e] += ddx * xv;
        double dxv = ddx * w.d[e];
        double ddt = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
          const double a = a_mat(e, n);
          const double dab = sg.abar(b, t, e, n);
          // d abar / d(dt, a): exp form scales by abar itself.
          const double gate = opt.discretization == Discretization::exp
                                  ? dab * c.scan.abar(b, t, e, n)
                                  : dab;
          ddt += gate * a;
          // a = -exp(a_log), so da/da_log = a.
          g.a_log(e, n) += gate * dt * a;
          const double dbx = sg.bx(b, t, e, n);
          const double bmv = c.bm(b, t, n);
          ddt += dbx * xv * bmv;
          dxv += dbx * dt * bmv;
          dbm(b, t, n) += dbx * dt * xv;
        }
        d_delta(b, t, e) = ddt;
        dxs(b, t, e) = dxv;
      }
    }

  // delta = softplus(xs W_delta + bias), B = xs W_b, C = xs W_c.
  TensorD d_pre({B, L, E});
  for (std::size_t i = 0; i < d_pre.size(); ++i) {
    d_pre[i] = d_delta[i] * detail::sigmoid(c.delta_pre[i]);
  }
  mat(g.w_delta) += mat(c.xs).transpose() * mat(d_pre);
  vec(g.delta_bias) += mat(d_pre).colwise().sum().transpose();
  mat(g.w_b) += mat(c.xs).transpose() * mat(dbm);
  mat(g.w_c) += mat(c.xs).transpose() * mat(sg.c);
  mat(dxs) += mat(d_pre) * mat(w.w_delta).transpose() + mat(dbm) * mat(w.w_b).transpose() +
              mat(sg.c) * mat(w.w_c).transpose();

  // SiLU and causal conv.
  TensorD dxp({B, L, E});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t e = 0; e < E; ++e) {
        const double dxc = dxs(b, t, e) * detail::silu_grad(c.xc(b, t, e));
        for (std::size_t k = 0; k < K; ++k) {
          const std::size_t back = K - 1 - k;
          if (back > t) continue;
          g.conv(e, k) += dxc * c.xp(b, t - back, e);
          dxp(b, t - back, e) += dxc * w.conv(e, k);
        }
      }

  // Projections.
  TensorD scaled({B, L, D});
  mat(scaled) = mat(c.normed) * vec(w.norm_scale).asDiagonal();
  mat(g.w_x) += mat(scaled).transpose() * mat(dxp);
  mat(g.w_z) += mat(scaled).transpose() * mat(dz);
  TensorD d_scaled({B, L, D});
  mat(d_scaled) = mat(dxp) * mat(w.w_x).transpose() + mat(dz) * mat(w.w_z).transpose();

  // RMS norm.
  for (std::size_t r = 0; r < B * L; ++r) {
    const double* xh = c.normed.ptr() + r * D;
    const double* ds = d_scaled.ptr() + r * D;
    double proj = 0.0;
    for (std::size_t k = 0; k < D; ++k) {
      g.norm_scale[k] += ds[k] * xh[k];
      proj += ds[k] * w.norm_scale[k] * xh[k];
    }
    proj /= static_cast<double>(D);
    for (std::size_t k = 0; k < D; ++k) {
      d_in[r * D + k] += (ds[k] * w.norm_scale[k] - xh[k] * proj) * c.inv_rms[r];
    }
  }
  return d_in;
}

}  // namespace lbscan
