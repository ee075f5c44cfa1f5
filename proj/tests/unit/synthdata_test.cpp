// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "lbscan/binary_io.hpp"
#include "lbscan/errors.hpp"
#include "lbscan/synthdata.hpp"

using namespace lbscan;
using namespace lbscan::synth;

namespace {

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) h = (h ^ b) * 0x100000001b3ull;
  return h;
}

double band_mean(const Dataset& ds, std::size_t i, std::size_t row0, std::size_t rows) {
  double s = 0.0;
  for (std::size_t y = row0; y < row0 + rows; ++y)
    for (std::size_t x = 0; x < kImageSize; ++x) s += ds.images(i, y, x, 0);
  return s / static_cast<double>(rows * kImageSize);
}

std::uint32_t le32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return std::uint32_t(b[at]) | std::uint32_t(b[at + 1]) << 8 | std::uint32_t(b[at + 2]) << 16 |
         std::uint32_t(b[at + 3]) << 24;
}

}  // namespace

TEST_CASE("generators: same seed, same bytes; samples do not depend on n") {
  for (const char* task : {"local", "global"}) {
    const Dataset a = gen_task(task, 7, 50), b = gen_task(task, 7, 50);
    CHECK(encode_dataset(a) == encode_dataset(b));
    CHECK(encode_dataset(gen_task(task, 8, 50)) != encode_dataset(a));
    const Dataset prefix = gen_task(task, 7, 20);
    CHECK(encode_dataset(prefix) == encode_dataset(a.slice(0, 20)));
  }
}

TEST_CASE("generators: pinned checksums guard cross-platform byte identity") {
  // Any change to the generators or the serialization changes these values.
  const std::uint64_t local = fnv1a(encode_dataset(gen_local_task(1, 8)));
  const std::uint64_t global = fnv1a(encode_dataset(gen_global_task(1, 8)));
  CHECK(local == 0x2ee6fec109eed4ddull);
  CHECK(global == 0x2d873c6c1950e30bull);
}

TEST_CASE("generators: labels balanced within 5% over 10^4 samples") {
  for (const char* task : {"local", "global"}) {
    const Dataset ds = gen_task(task, 2024, 10000);
    std::size_t ones = 0;
    for (std::uint32_t l : ds.labels) {
      CHECK(l <= 1);
      ones += l;
    }
    CAPTURE(task);
    CHECK(std::abs(static_cast<double>(ones) / 10000.0 - 0.5) <= 0.05);
  }
}

TEST_CASE("generators: values are float-representable and finite") {
  for (const char* task : {"local", "global"}) {
    const Dataset ds = gen_task(task, 3, 20);
    CHECK(ds.images.shape() == Shape{20, kImageSize, kImageSize, 1});
    for (double v : ds.images.data()) {
      CHECK(std::isfinite(v));
      CHECK(v == static_cast<double>(static_cast<float>(v)));
    }
  }
}

TEST_CASE("global task: label is the XOR of the two band properties") {
  CHECK(global_label(false, false) == 0);
  CHECK(global_label(true, true) == 0);
  CHECK(global_label(true, false) == 1);
  CHECK(global_label(false, true) == 1);

  std::vector<GlobalProps> props;
  const Dataset ds = gen_global_task(11, 4000, &props);
  REQUIRE(props.size() == 4000);
  // Exhaustive property table: count[top][bottom][label].
  std::size_t table[2][2][2] = {};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const GlobalProps& p = props[i];
    CHECK(ds.labels[i] == global_label(p.top_bright, p.bottom_bright));
    ++table[p.top_bright][p.bottom_bright][ds.labels[i]];
    // The properties are visible in the first and last patch-row bands.
    CHECK((band_mean(ds, i, 0, kBand) > 0) == p.top_bright);
    CHECK((band_mean(ds, i, kImageSize - kBand, kBand) > 0) == p.bottom_bright);
  }
  for (int top = 0; top < 2; ++top)
    for (int bottom = 0; bottom < 2; ++bottom) {
      CHECK(table[top][bottom][global_label(top, bottom)] > 0);
      CHECK(table[top][bottom][1 - global_label(top, bottom)] == 0);
    }
  // Neither half alone determines the label: for each value of one
  // property, both labels occur with about equal frequency.
  for (int v = 0; v < 2; ++v) {
    const double top_ones = double(table[v][0][1] + table[v][1][1]);
    const double top_all = top_ones + double(table[v][0][0] + table[v][1][0]);
    const double bottom_ones = double(table[0][v][1] + table[1][v][1]);
    const double bottom_all = bottom_ones + double(table[0][v][0] + table[1][v][0]);
    CHECK(std::abs(top_ones / top_all - 0.5) < 0.05);
    CHECK(std::abs(bottom_ones / bottom_all - 0.5) < 0.05);
  }
}

TEST_CASE("global task: the middle rows carry no label information") {
  std::vector<GlobalProps> props;
  const Dataset a = gen_global_task(12, 200, &props);
  double m0 = 0.0, m1 = 0.0;
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double m = band_mean(a, i, kBand, kImageSize - 2 * kBand);
    (a.labels[i] ? m1 : m0) += m;
    (a.labels[i] ? n1 : n0) += 1;
  }
  CHECK(std::abs(m0 / double(n0)) < 0.02);
  CHECK(std::abs(m1 / double(n1)) < 0.02);
}

TEST_CASE("local task: one aligned cell holds stripes whose direction is the label") {
  const Dataset ds = gen_local_task(13, 300);
  constexpr std::size_t cells = kImageSize / kCell;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    // Adjacent-pixel products: stripes alternate sign across rows (label 0)
    // or across columns (label 1).
    std::size_t striped = 0;
    for (std::size_t cy = 0; cy < cells; ++cy)
      for (std::size_t cx = 0; cx < cells; ++cx) {
        double across_rows = 0.0, across_cols = 0.0;
        for (std::size_t y = cy * kCell; y < (cy + 1) * kCell - 1; ++y)
          for (std::size_t x = cx * kCell; x < (cx + 1) * kCell - 1; ++x) {
            across_rows += ds.images(i, y, x, 0) * ds.images(i, y + 1, x, 0);
            across_cols += ds.images(i, y, x, 0) * ds.images(i, y, x + 1, 0);
          }
        if (across_rows < -20.0 || across_cols < -20.0) {
          ++striped;
          CHECK(ds.labels[i] == (across_rows < across_cols ? 0u : 1u));
        }
      }
    CHECK(striped == 1);
  }
}

TEST_CASE("generators: invalid requests") {
  CHECK_THROWS_AS(gen_task("local", 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_task("parity", 1, 4), std::invalid_argument);
  const Dataset ds = gen_local_task(1, 4);
  CHECK_THROWS_AS(ds.slice(3, 2), RangeError);
  CHECK_THROWS_AS(ds.slice(0, 0), RangeError);
}

TEST_CASE("LBDS: header layout, round trip and corruption checks") {
  const Dataset ds = gen_global_task(14, 5);
  const std::vector<std::uint8_t> bytes = encode_dataset(ds);
  REQUIRE(bytes.size() == 24 + 4 * (5 * 32 * 32) + 4 * 5);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "LBDS");
  CHECK(le32(bytes, 4) == kDatasetVersion);
  CHECK(le32(bytes, 8) == 5);
  CHECK(le32(bytes, 12) == 32);
  CHECK(le32(bytes, 16) == 32);
  CHECK(le32(bytes, 20) == 1);
  CHECK(le32(bytes, bytes.size() - 4) == ds.labels[4]);
  float first = 0.0f;
  std::memcpy(&first, &bytes[24], 4);  // little-endian host
  CHECK(static_cast<double>(first) == ds.images[0]);

  const Dataset back = decode_dataset(bytes);
  CHECK(back.images.storage() == ds.images.storage());
  CHECK(back.labels == ds.labels);

  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_dataset(bad), FormatError);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_AS(decode_dataset(bad), FormatError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_dataset(bad), FormatError);
  CHECK_THROWS_AS(decode_dataset(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10)),
                  FormatError);

  const std::string path =
      (std::filesystem::temp_directory_path() / "lbscan_synthdata_test.lbds").string();
  write_dataset(path, ds);
  const Dataset file = read_dataset(path);
  CHECK(file.images.storage() == ds.images.storage());
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_dataset(path), FormatError);
}
