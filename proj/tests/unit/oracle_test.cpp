// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "lbscan/oracle.hpp"
#include "test_util.hpp"

using namespace lbscan;
using namespace lbscan::testing;

namespace {

ScanParams<double> zeros_like(const ScanParams<double>& p) {
  return {TensorD(p.abar.shape()), TensorD(p.bx.shape()), TensorD(p.c.shape()),
          TensorD(p.dx.shape())};
}

}  // namespace

TEST_CASE("forward: L = 1 ignores the decay") {
  ScanParams<double> p = random_params(1, 1, 1, 2, 3);
  const auto out = oracle::forward_scan_seq(p, true);
  for (std::size_t i = 0; i < p.bx.size(); ++i) CHECK((*out.per_step_h)[i] == p.bx[i]);
}

TEST_CASE("forward: unit decay and one-hot readout is a prefix sum") {
  const std::size_t L = 9;
  ScanParams<double> p = random_params(2, 1, L, 1, 3);
  p.abar.fill(1.0);
  p.c.fill(0.0);
  for (std::size_t t = 0; t < L; ++t) p.c(0, t, 1) = 1.0;
  p.dx.fill(0.0);
  const auto out = oracle::forward_scan_seq(p);
  double running = 0.0;
  for (std::size_t t = 0; t < L; ++t) {
    running += p.bx(0, t, 0, 1);
    CHECK(out.y(0, t, 0) == doctest::Approx(running).epsilon(1e-14));
  }
}

TEST_CASE("forward: matches an independent per-element loop (seed 7)") {
  const ScanParams<double> p = random_params(7, 2, 7, 3, 4);
  const auto out = oracle::forward_scan_seq(p);
  CHECK(max_rel_error(out.y, brute_lbm_y(p, 1)) <= 1e-13);
}

TEST_CASE("forward: shape and finiteness errors") {
  ScanParams<double> p = random_params(3, 1, 4, 2, 2);
  ScanParams<double> bad = p;
  bad.c = TensorD({1, 4, 3});
  CHECK_THROWS_AS(oracle::forward_scan_seq(bad), ShapeError);
  bad = p;
  bad.bx[3] = std::nan("");
  CHECK_THROWS_AS(oracle::forward_scan_seq(bad), NonFiniteError);
}

TEST_CASE("global backward: reflection of the forward scan") {
  const ScanParams<double> p = random_params(11, 2, 13, 3, 4);
  const auto back = oracle::global_backward_scan_seq(p);
  const auto mirrored = oracle::forward_scan_seq(p.reversed());
  const TensorD expect = reverse_seq(mirrored.y);
  CHECK(max_rel_error(back.y, expect) <= 1e-12);
}

TEST_CASE("global backward: L = 1") {
  const ScanParams<double> p = random_params(12, 1, 1, 2, 2);
  const auto out = oracle::global_backward_scan_seq(p, true);
  for (std::size_t i = 0; i < p.bx.size(); ++i) CHECK((*out.per_step_h)[i] == p.bx[i]);
}

TEST_CASE("global bidir: zero backward readout equals forward-only") {
  const ScanParams<double> pf = random_params(21, 1, 10, 2, 3);
  ScanParams<double> pb = random_params(22, 1, 10, 2, 3);
  pb.c.fill(0.0);
  pb.dx.fill(0.0);
  CHECK(oracle::global_bidir_seq(pf, pb).y == oracle::forward_scan_seq(pf).y);
}

TEST_CASE("global bidir: L = 1 with shared parameters doubles the readout") {
  const ScanParams<double> p = random_params(23, 1, 1, 3, 4);
  const auto out = oracle::global_bidir_seq(p, p);
  for (std::size_t e = 0; e < 3; ++e) {
    double expect = 2.0 * p.dx(0, 0, e);
    for (std::size_t n = 0; n < 4; ++n) expect += 2.0 * p.c(0, 0, n) * p.bx(0, 0, e, n);
    CHECK(out.y(0, 0, e) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("global bidir: sum of the two directional oracles") {
  const ScanParams<double> pf = random_params(24, 2, 9, 2, 3);
  const ScanParams<double> pb = random_params(25, 2, 9, 2, 3);
  TensorD expect = oracle::forward_scan_seq(pf).y;
  const TensorD yb = oracle::global_backward_scan_seq(pb).y;
  for (std::size_t i = 0; i < expect.size(); ++i) expect[i] += yb[i];
  CHECK(oracle::global_bidir_seq(pf, pb).y == expect);
  CHECK_THROWS_AS(oracle::global_bidir_seq(pf, random_params(1, 2, 8, 2, 3)), ShapeError);
}

TEST_CASE("local backward: zero at every tile end") {
  const std::size_t L = 11;
  for (std::size_t M : {1, 3, 4, 11}) {
    const ScanParams<double> p = random_params(30 + M, 1, L, 2, 2);
    const TensorD hb = oracle::local_backward_scan_seq(p.abar, p.bx, M);
    for (std::size_t i = 0; i < L; ++i) {
      if ((i + 1) % M == 0 || i == L - 1) {
        for (std::size_t e = 0; e < 2; ++e)
          for (std::size_t n = 0; n < 2; ++n) CHECK(hb(0, i, e, n) == 0.0);
      }
    }
  }
}

TEST_CASE("local backward: whole-sequence tile with unit decay is an exclusive suffix sum") {
  const std::size_t L = 8;
  ScanParams<double> p = random_params(31, 1, L, 1, 2);
  p.abar.fill(1.0);
  const TensorD hb = oracle::local_backward_scan_seq(p.abar, p.bx, L);
  for (std::size_t i = 0; i < L; ++i) {
    double suffix = 0.0;
    for (std::size_t j = i + 1; j < L; ++j) suffix += p.bx(0, j, 0, 1);
    CHECK(hb(0, i, 0, 1) == doctest::Approx(suffix).epsilon(1e-14));
  }
}

TEST_CASE("local backward: per-tile closed form (M = 3, L = 6, seed 13)") {
  const ScanParams<double> p = random_params(13, 2, 6, 2, 3);
  const TensorD hb = oracle::local_backward_scan_seq(p.abar, p.bx, 3);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t e = 0; e < 2; ++e)
        for (std::size_t n = 0; n < 3; ++n)
          CHECK(hb(b, i, e, n) ==
                doctest::Approx(brute_local_backward_state(p, 3, b, i, e, n)).epsilon(1e-14));
}

TEST_CASE("local backward: ragged final tile resets at L - 1") {
  const ScanParams<double> p = random_params(14, 1, 7, 1, 2);
  const TensorD hb = oracle::local_backward_scan_seq(p.abar, p.bx, 3);
  CHECK(hb(0, 6, 0, 0) == 0.0);
  CHECK(hb(0, 5, 0, 0) == 0.0);
  CHECK(hb(0, 4, 0, 0) == doctest::Approx(p.abar(0, 4, 0, 0) * p.bx(0, 5, 0, 0)));
  CHECK(hb(0, 3, 0, 0) != 0.0);
}

TEST_CASE("local backward: tile length out of range") {
  const ScanParams<double> p = random_params(15, 1, 5, 1, 1);
  CHECK_THROWS_AS(oracle::local_backward_scan_seq(p.abar, p.bx, 0), RangeError);
  CHECK_THROWS_AS(oracle::local_backward_scan_seq(p.abar, p.bx, 6), RangeError);
  CHECK_THROWS_AS(oracle::lbm_scan_seq(p, 0), RangeError);
}

TEST_CASE("local backward: reflection of an exclusive forward scan when M = L") {
  // Exclusive forward form under the matching convention: abar_t * h_{t-1},
  // i.e. the inclusive state minus bx_t.
  const ScanParams<double> p = random_params(16, 2, 10, 2, 3);
  const TensorD hb = oracle::local_backward_scan_seq(p.abar, p.bx, 10);
  const ScanParams<double> rev = p.reversed();
  const auto fwd = oracle::forward_scan_seq(rev, true);
  TensorD excl = *fwd.per_step_h;
  for (std::size_t i = 0; i < excl.size(); ++i) excl[i] -= rev.bx[i];
  CHECK(max_rel_error(hb, reverse_seq(excl)) <= 1e-12);
}

TEST_CASE("lbm: tile ends reproduce forward-only exactly") {
  const std::size_t L = 14, M = 4;
  const ScanParams<double> p = random_params(18, 2, L, 3, 4);
  const auto lbm = oracle::lbm_scan_seq(p, M);
  const auto fwd = oracle::forward_scan_seq(p);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < L; ++i) {
      if ((i + 1) % M != 0 && i != L - 1) continue;
      for (std::size_t e = 0; e < 3; ++e) CHECK(lbm.y(b, i, e) == fwd.y(b, i, e));
    }
}

TEST_CASE("lbm: M = 1 is forward-only") {
  const ScanParams<double> p = random_params(19, 2, 9, 3, 2);
  CHECK(oracle::lbm_scan_seq(p, 1).y == oracle::forward_scan_seq(p).y);
}

TEST_CASE("lbm: brute-force expansion of the block loop (M = L = 4, seed 17)") {
  const ScanParams<double> p = random_params(17, 1, 4, 2, 3);
  CHECK(max_rel_error(oracle::lbm_scan_seq(p, 4).y, brute_lbm_y(p, 4)) <= 1e-13);
  const ScanParams<double> q = random_params(117, 2, 11, 2, 3);
  for (std::size_t M : {2, 3, 5, 11})
    CHECK(max_rel_error(oracle::lbm_scan_seq(q, M).y, brute_lbm_y(q, M)) <= 1e-13);
}

TEST_CASE("lbm: receptive field stops at the tile end") {
  // dy_i/dbx_j by perturbation: exactly zero for j > tile_end(i), nonzero
  // generically inside the window.
  const std::size_t L = 10, M = 3;
  const ScanParams<double> base = random_params(41, 1, L, 1, 2, 0.2);
  const TensorD y0 = oracle::lbm_scan_seq(base, M).y;
  for (std::size_t j = 0; j < L; ++j) {
    ScanParams<double> p = base;
    p.bx(0, j, 0, 0) += 0.5;
    p.bx(0, j, 0, 1) -= 0.25;
    const TensorD y1 = oracle::lbm_scan_seq(p, M).y;
    for (std::size_t i = 0; i < L; ++i) {
      const bool reachable = j <= brute_tile_end(i, M, L);
      if (reachable) {
        CHECK(y1(0, i, 0) != y0(0, i, 0));
      } else {
        CHECK(y1(0, i, 0) == y0(0, i, 0));
      }
    }
  }
}

TEST_CASE("lbm: linear in bx when dx = 0") {
  ScanParams<double> p = random_params(43, 2, 12, 2, 3);
  p.dx.fill(0.0);
  const TensorD y = oracle::lbm_scan_seq(p, 4).y;
  ScanParams<double> scaled = p;
  const double alpha = -2.75;
  for (auto& v : scaled.bx.storage()) v *= alpha;
  TensorD expect = y;
  for (auto& v : expect.storage()) v *= alpha;
  CHECK(max_rel_error(oracle::lbm_scan_seq(scaled, 4).y, expect) <= 1e-12);
  CHECK(oracle::lbm_scan_seq(zeros_like(p), 4).y == TensorD(p.dx.shape()));
}
