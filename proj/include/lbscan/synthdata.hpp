// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lbscan/tensor.hpp"

// Deterministic 32x32 single-channel classification tasks. Sample i depends
// only on (seed, i), and generation uses integer-derived uniforms with plain
// arithmetic, so datasets are byte-identical across platforms.
namespace lbscan::synth {

inline constexpr std::size_t kImageSize = 32;
inline constexpr std::size_t kCell = 8;     // texture cell of the local task
inline constexpr std::size_t kBand = 8;     // rows per band of the global task

struct Dataset {
  TensorD images;                     // (n, 32, 32, 1)
  std::vector<std::uint32_t> labels;  // n

  std::size_t size() const { return labels.size(); }
  // Samples [begin, begin + count) as a new dataset.
  Dataset slice(std::size_t begin, std::size_t count) const;
};

// One 8x8-aligned cell carries stripes, horizontal (label 0) or vertical
// (label 1); every other pixel is noise.
Dataset gen_local_task(std::uint64_t seed, std::size_t n);

// Per-sample generator properties of the global task.
struct GlobalProps {
  bool top_bright = false;     // sign of the offset on rows 0..7
  bool bottom_bright = false;  // sign of the offset on rows 24..31
};

// Label of the global task: 1 when the two markers differ in sign.
std::uint32_t global_label(bool top_bright, bool bottom_bright);

// Noise images whose first patch row band (rows 0..7) and last band
// (rows 24..31) are each shifted by +-0.5; label = XOR of the two signs.
Dataset gen_global_task(std::uint64_t seed, std::size_t n,
                        std::vector<GlobalProps>* props = nullptr);

// "local" or "global".
Dataset gen_task(const std::string& task, std::uint64_t seed, std::size_t n);

// Flat binary: "LBDS", version u32, count u32, H u32, W u32, C u32, images as
// little-endian f32, labels as u32.
inline constexpr std::uint32_t kDatasetVersion = 1;
std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);
void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

}  // namespace lbscan::synth
