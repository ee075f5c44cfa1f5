// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lbscan/model.hpp"

// Checkpoint layout: "LBCK", version u32, config text (u32 length, canonical
// key=value lines), tensor count u32, then per tensor: name length u16, name,
// rank u8, dims u32[rank], values as little-endian f32. All integers are
// little-endian.
namespace lbscan::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Weights are stored as f32; values that are not float-representable are
// rounded to nearest.
std::vector<std::uint8_t> encode_checkpoint(const Model& model);
// Throws FormatError on any structural problem, including tensors that do
// not match the stored config.
Model decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace lbscan::io
