// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/harness.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include <fmt/format.h>

#include "lbscan/engine.hpp"
#include "lbscan/oracle.hpp"
#include "lbscan/rng.hpp"

namespace lbscan::harness {
namespace {

void fill(TensorD& t, Rng& rng, double lo, double hi) {
  for (double& v : t.storage()) v = rng.uniform(lo, hi);
}

template <class T>
ScanOutput<T> run_engine(const engine::ScanEngine& eng, Variant v, const ScanParams<T>& pf,
                         const ScanParams<T>& pb, const engine::TilePlan& plan) {
  switch (v) {
    case Variant::forward:
      return eng.forward(pf, plan);
    case Variant::lbm:
      return eng.lbm(pf, plan);
    case Variant::global_bidir:
      return eng.global_bidir(pf, pb, plan);
  }
  throw std::invalid_argument("unknown variant");
}

OracleOutput run_oracle(Variant v, const ScanParams<double>& pf, const ScanParams<double>& pb,
                        std::size_t tile_len) {
  switch (v) {
    case Variant::forward:
      return oracle::forward_scan_seq(pf);
    case Variant::lbm:
      return oracle::lbm_scan_seq(pf, tile_len);
    case Variant::global_bidir:
      return oracle::global_bidir_seq(pf, pb);
  }
  throw std::invalid_argument("unknown variant");
}

template <class T>
SelectiveParams<T> random_selective(std::uint64_t seed, const BenchConfig& c) {
  Rng rng(seed);
  SelectiveParams<T> s;
  const std::size_t B = c.batch, L = c.length, E = c.inner, N = c.state;
  s.delta = Tensor<T>({B, L, E});
  s.a = Tensor<T>({E, N});
  s.b = Tensor<T>({B, L, N});
  s.c = Tensor<T>({B, L, N});
  s.d = Tensor<T>({E});
  s.x = Tensor<T>({B, L, E});
  for (T& v : s.delta.storage()) v = static_cast<T>(rng.uniform(0.001, 0.1));
  for (T& v : s.a.storage()) v = static_cast<T>(-rng.uniform(0.5, 4.0));
  for (Tensor<T>* t : {&s.b, &s.c, &s.x, &s.d}) {
    for (T& v : t->storage()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  }
  return s;
}

template <class T>
std::vector<BenchRow> bench_impl(const BenchConfig& c) {
  const SelectiveParams<T> fwd = random_selective<T>(c.seed, c);
  const SelectiveParams<T> bwd = random_selective<T>(c.seed + 1, c);
  const engine::ScanEngine eng(c.workers);
  const engine::TilePlan plan = c.tile_len == 0 ? engine::TilePlan::automatic(c.length)
                                                : engine::TilePlan::make(c.length, c.tile_len);
  std::vector<BenchRow> rows;
  std::vector<std::vector<double>> times(c.variants.size());
  for (Variant v : c.variants) {
    const ScanOutput<T> out = eng.selective<T>(v, fwd, &bwd, plan);  // warm-up
    rows.push_back({v, c.length, plan.tile_len, c.workers, 0.0, out.cost});
  }
  for (std::size_t r = 0; r < c.reps; ++r) {
    for (std::size_t k = 0; k < c.variants.size(); ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      const ScanOutput<T> out = eng.selective<T>(c.variants[k], fwd, &bwd, plan);
      const auto t1 = std::chrono::steady_clock::now();
      times[k].push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
  }
  for (std::size_t k = 0; k < rows.size(); ++k) rows[k].median_ns = median(times[k]);
  return rows;
}

}  // namespace

ScanParams<double> random_scan_params(std::uint64_t seed, std::size_t B, std::size_t L,
                                      std::size_t E, std::size_t N) {
  Rng rng(seed);
  ScanParams<double> p{TensorD({B, L, E, N}), TensorD({B, L, E, N}), TensorD({B, L, N}),
                       TensorD({B, L, E})};
  fill(p.abar, rng, 0.0, 1.0);
  fill(p.bx, rng, -1.0, 1.0);
  fill(p.c, rng, -1.0, 1.0);
  fill(p.dx, rng, -1.0, 1.0);
  return p;
}

double verify_tolerance(Precision p) { return p == Precision::single_ ? 1e-5 : 1e-12; }

std::vector<VerifyRow> run_verify(const VerifyConfig& c) {
  std::vector<VerifyRow> rows;
  std::uint64_t seed = c.seed;
  for (std::size_t L : c.lengths) {
    if (L == 0) throw std::invalid_argument("verify: lengths must be >= 1");
    for (std::size_t M : c.tiles) {
      if (M == 0) throw std::invalid_argument("verify: tile lengths must be >= 1");
      const engine::TilePlan plan = engine::TilePlan::make(L, M);
      const ScanParams<double> pf = random_scan_params(seed++, c.batch, L, c.inner, c.state);
      const ScanParams<double> pb = random_scan_params(seed++, c.batch, L, c.inner, c.state);
      const ScanParams<float> ff = pf.cast<float>(), fb = pb.cast<float>();
      const ScanParams<double> rf = ff.cast<double>(), rb = fb.cast<double>();
      for (Variant v : c.variants) {
        const OracleOutput want_d = run_oracle(v, pf, pb, std::min(M, L));
        const OracleOutput want_f = run_oracle(v, rf, rb, std::min(M, L));
        for (std::size_t w : c.workers) {
          const engine::ScanEngine eng(w);
          for (Precision prec : c.precisions) {
            VerifyRow row{v, prec, L, M, w, 0.0, false};
            if (prec == Precision::double_) {
              row.max_rel_error = max_rel_error(run_engine(eng, v, pf, pb, plan).y, want_d.y);
            } else {
              row.max_rel_error = max_rel_error(run_engine(eng, v, ff, fb, plan).y, want_f.y);
            }
            row.pass = row.max_rel_error <= verify_tolerance(prec);
            rows.push_back(row);
          }
        }
      }
    }
  }
  return rows;
}

std::vector<BenchRow> run_bench(const BenchConfig& c) {
  if (c.length == 0 || c.batch == 0 || c.inner == 0 || c.state == 0 || c.workers == 0) {
    throw std::invalid_argument("bench: dimensions and workers must be >= 1");
  }
  if (c.reps == 0) throw std::invalid_argument("bench: reps must be >= 1");
  return c.precision == Precision::single_ ? bench_impl<float>(c) : bench_impl<double>(c);
}

std::string bench_csv_header() {
  return "variant,L,M,workers,median_ns,flops,hbm_elems,tile_exchanges";
}

std::string bench_csv_row(const BenchRow& r) {
  return fmt::format("{},{},{},{},{:.0f},{},{},{}", to_string(r.variant), r.length, r.tile_len,
                     r.workers, r.median_ns, r.cost.flops, r.cost.hbm_elems(),
                     r.cost.tile_exchanges);
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace lbscan::harness
