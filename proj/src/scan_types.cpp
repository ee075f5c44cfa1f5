// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/scan_types.hpp"

#include <cmath>
#include <string>

namespace lbscan {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::forward:
      return "forward";
    case Variant::global_bidir:
      return "global_bidir";
    case Variant::lbm:
      return "lbm";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "forward") return Variant::forward;
  if (s == "global_bidir" || s == "bidir") return Variant::global_bidir;
  if (s == "lbm") return Variant::lbm;
  throw std::invalid_argument("unknown scan variant '" + std::string(s) + "'");
}

std::string_view to_string(KernelForm f) {
  return f == KernelForm::fused ? "fused" : "discretized";
}

KernelForm parse_kernel_form(std::string_view s) {
  if (s == "fused") return KernelForm::fused;
  if (s == "discretized") return KernelForm::discretized;
  throw std::invalid_argument("unknown kernel form '" + std::string(s) + "'");
}

template <class T>
ScanDims ScanParams<T>::validate() const {
  if (abar.rank() != 4) {
    throw ShapeError("abar must be (B, L, E, N), got " + shape_str(abar.shape()));
  }
  ScanDims d{abar.dim(0), abar.dim(1), abar.dim(2), abar.dim(3)};
  require_shape(bx.shape(), abar.shape(), "bx");
  require_shape(c.shape(), {d.batch, d.length, d.state}, "c");
  require_shape(dx.shape(), {d.batch, d.length, d.inner}, "dx");
  abar.check_finite("abar");
  bx.check_finite("bx");
  c.check_finite("c");
  dx.check_finite("dx");
  return d;
}

template <class T>
ScanDims SelectiveParams<T>::validate() const {
  if (delta.rank() != 3) {
    throw ShapeError("delta must be (B, L, E), got " + shape_str(delta.shape()));
  }
  if (a.rank() != 2) throw ShapeError("a must be (E, N), got " + shape_str(a.shape()));
  ScanDims d{delta.dim(0), delta.dim(1), delta.dim(2), a.dim(1)};
  require_shape(a.shape(), {d.inner, d.state}, "a");
  require_shape(b.shape(), {d.batch, d.length, d.state}, "b");
  require_shape(c.shape(), {d.batch, d.length, d.state}, "c");
  require_shape(this->d.shape(), {d.inner}, "d");
  require_shape(x.shape(), delta.shape(), "x");
  delta.check_finite("delta");
  a.check_finite("a");
  b.check_finite("b");
  c.check_finite("c");
  this->d.check_finite("d");
  x.check_finite("x");
  return d;
}

template <class T>
ScanParams<T> SelectiveParams<T>::discretize() const {
  const ScanDims dims = validate();
  const std::size_t B = dims.batch, L = dims.length, E = dims.inner, N = dims.state;
  ScanParams<T> p{Tensor<T>({B, L, E, N}), Tensor<T>({B, L, E, N}), c,
                  Tensor<T>({B, L, E})};
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t e = 0; e < E; ++e) {
        const T dt = delta(bi, t, e);
        const T xv = x(bi, t, e);
        const T dtx = dt * xv;
        for (std::size_t n = 0; n < N; ++n) {
          p.abar(bi, t, e, n) = std::exp(dt * a(e, n));
          p.bx(bi, t, e, n) = dtx * b(bi, t, n);
        }
        p.dx(bi, t, e) = d(e) * xv;
      }
    }
  }
  return p;
}

template struct ScanParams<float>;
template struct ScanParams<double>;
template struct SelectiveParams<float>;
template struct SelectiveParams<double>;

}  // namespace lbscan
