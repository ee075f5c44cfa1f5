// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/synthdata.hpp"

#include <stdexcept>

#include "lbscan/binary_io.hpp"
#include "lbscan/rng.hpp"

namespace lbscan::synth {
namespace {

constexpr double kLocalNoise = 0.5;
constexpr double kStripeNoise = 0.25;
constexpr double kGlobalNoise = 0.25;
constexpr double kBandOffset = 0.5;

Rng sample_rng(std::uint64_t seed, std::size_t index) {
  // Distinct stream per (seed, sample); splitmix64 finalizer.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return Rng(z ^ (z >> 31));
}

// Zero-mean, unit-variance Irwin-Hall(4) noise: arithmetic only.
double noise(Rng& rng) {
  const double s = rng.uniform() + rng.uniform() + rng.uniform() + rng.uniform();
  return (s - 2.0) * 1.7320508075688772;
}

// Store as float so the in-memory dataset equals its serialized form.
double as_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

Dataset empty_dataset(std::size_t n) {
  if (n == 0) throw std::invalid_argument("dataset size must be >= 1");
  return Dataset{TensorD({n, kImageSize, kImageSize, 1}), std::vector<std::uint32_t>(n)};
}

}  // namespace

Dataset Dataset::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > size() || count == 0) throw RangeError("dataset slice out of range");
  const std::size_t per = images.size() / size();
  Shape shape = images.shape();
  shape[0] = count;
  return Dataset{TensorD(shape, std::vector<double>(images.ptr() + begin * per,
                                                    images.ptr() + (begin + count) * per)),
                 std::vector<std::uint32_t>(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                                            labels.begin() +
                                                static_cast<std::ptrdiff_t>(begin + count))};
}

Dataset gen_local_task(std::uint64_t seed, std::size_t n) {
  Dataset ds = empty_dataset(n);
  constexpr std::size_t cells = kImageSize / kCell;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = sample_rng(seed, i);
    const std::uint32_t label = static_cast<std::uint32_t>(rng.below(2));
    const std::size_t cy = rng.below(cells) * kCell, cx = rng.below(cells) * kCell;
    for (std::size_t y = 0; y < kImageSize; ++y)
      for (std::size_t x = 0; x < kImageSize; ++x) {
        const bool in_cell = y >= cy && y < cy + kCell && x >= cx && x < cx + kCell;
        double v;
        if (in_cell) {
          const std::size_t phase = label == 0 ? y - cy : x - cx;
          v = (phase % 2 == 0 ? 1.0 : -1.0) + kStripeNoise * noise(rng);
        } else {
          v = kLocalNoise * noise(rng);
        }
        ds.images(i, y, x, 0) = as_f32(v);
      }
    ds.labels[i] = label;
  }
  return ds;
}

std::uint32_t global_label(bool top_bright, bool bottom_bright) {
  return top_bright != bottom_bright ? 1u : 0u;
}

Dataset gen_global_task(std::uint64_t seed, std::size_t n, std::vector<GlobalProps>* props) {
  Dataset ds = empty_dataset(n);
  if (props) props->assign(n, GlobalProps{});
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = sample_rng(seed, i);
    GlobalProps p;
    p.top_bright = rng.below(2) == 1;
    p.bottom_bright = rng.below(2) == 1;
    const double top = p.top_bright ? kBandOffset : -kBandOffset;
    const double bottom = p.bottom_bright ? kBandOffset : -kBandOffset;
    for (std::size_t y = 0; y < kImageSize; ++y)
      for (std::size_t x = 0; x < kImageSize; ++x) {
        double v = kGlobalNoise * noise(rng);
        if (y < kBand) v += top;
        if (y >= kImageSize - kBand) v += bottom;
        ds.images(i, y, x, 0) = as_f32(v);
      }
    ds.labels[i] = global_label(p.top_bright, p.bottom_bright);
    if (props) (*props)[i] = p;
  }
  return ds;
}

Dataset gen_task(const std::string& task, std::uint64_t seed, std::size_t n) {
  if (task == "local") return gen_local_task(seed, n);
  if (task == "global") return gen_global_task(seed, n);
  throw std::invalid_argument("unknown task '" + task + "' (expected local|global)");
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  if (ds.images.rank() != 4 || ds.images.dim(0) != ds.size()) {
    throw ShapeError("dataset images must be (n, H, W, C) with n labels");
  }
  bin::Writer w;
  w.bytes("LBDS");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  for (std::size_t a = 1; a < 4; ++a) w.u32(static_cast<std::uint32_t>(ds.images.dim(a)));
  for (double v : ds.images.data()) w.f32(static_cast<float>(v));
  for (std::uint32_t l : ds.labels) w.u32(l);
  return std::move(w.buffer());
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  bin::Reader r(bytes, "dataset");
  if (r.bytes(4) != "LBDS") throw FormatError("dataset: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    throw FormatError("dataset: unsupported version " + std::to_string(version));
  }
  const std::size_t n = r.u32(), h = r.u32(), w = r.u32(), c = r.u32();
  if (n == 0 || h == 0 || w == 0 || c == 0) throw FormatError("dataset: empty dimension");
  const std::size_t count = n * h * w * c;
  if (r.remaining() != 4 * (count + n)) throw FormatError("dataset: size mismatch");
  Dataset ds{TensorD({n, h, w, c}), std::vector<std::uint32_t>(n)};
  for (std::size_t i = 0; i < count; ++i) ds.images[i] = r.f32();
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = r.u32();
  ds.images.check_finite("dataset images");
  return ds;
}

void write_dataset(const std::string& path, const Dataset& ds) {
  bin::write_file(path, encode_dataset(ds));
}

Dataset read_dataset(const std::string& path) { return decode_dataset(bin::read_file(path)); }

}  // namespace lbscan::synth
