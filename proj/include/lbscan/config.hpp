// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "lbscan/scan_types.hpp"

namespace lbscan {

// Flat key=value text. '#' starts a comment; blank lines are ignored.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values_file(const std::string& path);
// Canonical form: keys sorted, one "key=value" per line.
std::string format_key_values(const KeyValues& kv);

enum class HeadType { gap, map };
enum class ClassToken { none, head, middle, double_ };
enum class Discretization { exp, linear };
enum class Precision { single_, double_ };

std::string_view to_string(HeadType h);
std::string_view to_string(ClassToken c);
std::string_view to_string(Discretization d);
std::string_view to_string(Precision p);

struct ModelConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 4;
  std::size_t channels = 1;
  std::size_t embed_dim = 64;   // D
  std::size_t inner_dim = 128;  // E
  std::size_t state_dim = 16;   // N
  std::size_t depth = 4;        // U
  std::size_t tile_len = 0;     // M; 0 selects from the sequence length
  std::size_t conv_kernel = 4;
  std::size_t num_classes = 10;
  std::size_t map_heads = 4;
  HeadType head = HeadType::gap;
  ClassToken class_token = ClassToken::none;
  Variant scan = Variant::lbm;  // lbm or forward inside each block
  Discretization discretization = Discretization::exp;
  Precision scan_precision = Precision::double_;
  bool reverse = true;        // flip the sequence at the end of every block
  bool restore_order = true;  // undo a pending flip (odd depth) before the head

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t num_class_tokens() const;
  std::size_t seq_len() const { return num_patches() + num_class_tokens(); }
  std::size_t effective_tile_len() const;
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  KeyValues to_key_values() const;
  // Reads known keys; other keys are ignored so one file can also carry
  // training settings.
  static ModelConfig from_key_values(const KeyValues& kv);
};

// The small default used for quick runs and CI.
ModelConfig desk_config();

}  // namespace lbscan
