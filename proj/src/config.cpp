// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lbscan/engine.hpp"

namespace lbscan {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("config key '" + key + "': expected a non-negative integer, got '" +
                                v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + v + "'");
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(content).substr(0, eq));
    if (key.empty()) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": empty key");
    }
    kv[key] = trim(std::string_view(content).substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string_view to_string(HeadType h) { return h == HeadType::gap ? "gap" : "map"; }

std::string_view to_string(ClassToken c) {
  switch (c) {
    case ClassToken::none:
      return "none";
    case ClassToken::head:
      return "head";
    case ClassToken::middle:
      return "middle";
    case ClassToken::double_:
      return "double";
  }
  return "?";
}

std::string_view to_string(Discretization d) {
  return d == Discretization::exp ? "exp" : "linear";
}

std::string_view to_string(Precision p) {
  return p == Precision::single_ ? "single" : "double";
}

std::size_t ModelConfig::num_class_tokens() const {
  switch (class_token) {
    case ClassToken::none:
      return 0;
    case ClassToken::head:
    case ClassToken::middle:
      return 1;
    case ClassToken::double_:
      return 2;
  }
  return 0;
}

std::size_t ModelConfig::effective_tile_len() const {
  return tile_len == 0 ? engine::select_tile_len(seq_len()) : tile_len;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (patch_size == 0 || image_size == 0) fail("image_size and patch_size must be positive");
  if (image_size % patch_size != 0) {
    fail("image_size " + std::to_string(image_size) + " is not divisible by patch_size " +
         std::to_string(patch_size));
  }
  if (channels == 0 || embed_dim == 0 || inner_dim == 0 || state_dim == 0) {
    fail("dimensions must be positive");
  }
  if (depth < 1) fail("depth must be >= 1");
  if (conv_kernel < 1) fail("conv_kernel must be >= 1");
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (head == HeadType::map && (map_heads == 0 || embed_dim % map_heads != 0)) {
    fail("embed_dim must be divisible by map_heads");
  }
  if (scan != Variant::lbm && scan != Variant::forward) {
    fail("blocks support scan=lbm or scan=forward");
  }
}

KeyValues ModelConfig::to_key_values() const {
  return {
      {"channels", std::to_string(channels)},
      {"class_token", std::string(to_string(class_token))},
      {"conv_kernel", std::to_string(conv_kernel)},
      {"depth", std::to_string(depth)},
      {"discretization", std::string(to_string(discretization))},
      {"embed_dim", std::to_string(embed_dim)},
      {"head", std::string(to_string(head))},
      {"image_size", std::to_string(image_size)},
      {"inner_dim", std::to_string(inner_dim)},
      {"map_heads", std::to_string(map_heads)},
      {"num_classes", std::to_string(num_classes)},
      {"patch_size", std::to_string(patch_size)},
      {"restore_order", restore_order ? "true" : "false"},
      {"reverse", reverse ? "true" : "false"},
      {"scan", std::string(lbscan::to_string(scan))},
      {"scan_precision", std::string(to_string(scan_precision))},
      {"state_dim", std::to_string(state_dim)},
      {"tile_len", tile_len == 0 ? "auto" : std::to_string(tile_len)},
  };
}

ModelConfig ModelConfig::from_key_values(const KeyValues& kv) {
  ModelConfig c;
  auto get = [&](const char* key, auto apply) {
    if (auto it = kv.find(key); it != kv.end()) apply(it->first, it->second);
  };
  auto size_field = [&](const char* key, std::size_t& field) {
    get(key, [&](const std::string& k, const std::string& v) { field = parse_size(k, v); });
  };
  size_field("image_size", c.image_size);
  size_field("patch_size", c.patch_size);
  size_field("channels", c.channels);
  size_field("embed_dim", c.embed_dim);
  size_field("inner_dim", c.inner_dim);
  size_field("state_dim", c.state_dim);
  size_field("depth", c.depth);
  size_field("conv_kernel", c.conv_kernel);
  size_field("num_classes", c.num_classes);
  size_field("map_heads", c.map_heads);
  get("tile_len", [&](const std::string& k, const std::string& v) {
    c.tile_len = v == "auto" ? 0 : parse_size(k, v);
  });
  get("head", [&](const std::string& k, const std::string& v) {
    if (v == "gap") c.head = HeadType::gap;
    else if (v == "map") c.head = HeadType::map;
    else throw std::invalid_argument("config key '" + k + "': expected gap|map");
  });
  get("class_token", [&](const std::string& k, const std::string& v) {
    if (v == "none") c.class_token = ClassToken::none;
    else if (v == "head") c.class_token = ClassToken::head;
    else if (v == "middle") c.class_token = ClassToken::middle;
    else if (v == "double") c.class_token = ClassToken::double_;
    else throw std::invalid_argument("config key '" + k + "': expected none|head|middle|double");
  });
  get("scan", [&](const std::string&, const std::string& v) { c.scan = parse_variant(v); });
  get("discretization", [&](const std::string& k, const std::string& v) {
    if (v == "exp") c.discretization = Discretization::exp;
    else if (v == "linear") c.discretization = Discretization::linear;
    else throw std::invalid_argument("config key '" + k + "': expected exp|linear");
  });
  get("scan_precision", [&](const std::string& k, const std::string& v) {
    if (v == "single") c.scan_precision = Precision::single_;
    else if (v == "double") c.scan_precision = Precision::double_;
    else throw std::invalid_argument("config key '" + k + "': expected single|double");
  });
  get("reverse", [&](const std::string& k, const std::string& v) { c.reverse = parse_bool(k, v); });
  get("restore_order",
      [&](const std::string& k, const std::string& v) { c.restore_order = parse_bool(k, v); });
  c.validate();
  return c;
}

ModelConfig desk_config() {
  ModelConfig c;
  c.image_size = 32;
  c.patch_size = 4;
  c.embed_dim = 64;
  c.inner_dim = 128;
  c.state_dim = 16;
  c.depth = 4;
  c.tile_len = 0;
  return c;
}

}  // namespace lbscan
