// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/checkpoint.hpp"

#include <limits>

#include "lbscan/binary_io.hpp"
#include "lbscan/errors.hpp"

namespace lbscan::io {

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  bin::Writer w;
  w.bytes("LBCK");
  w.u32(kCheckpointVersion);
  const std::string config = format_key_values(model.config.to_key_values());
  w.u32(static_cast<std::uint32_t>(config.size()));
  w.bytes(config);
  std::uint32_t count = 0;
  model.weights.for_each([&](const std::string&, const TensorD&) { ++count; });
  w.u32(count);
  model.weights.for_each([&](const std::string& name, const TensorD& t) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f32(static_cast<float>(v));
  });
  return std::move(w.buffer());
}

Model decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  bin::Reader r(bytes, "checkpoint");
  if (r.bytes(4) != "LBCK") throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t config_len = r.u32();
  ModelConfig config;
  try {
    config = ModelConfig::from_key_values(parse_key_values(r.bytes(config_len)));
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: bad config: ") + e.what());
  }
  Model model{config, ModelWeights::zeros(config)};
  std::uint32_t expected = 0;
  model.weights.for_each([&](const std::string&, const TensorD&) { ++expected; });
  const std::uint32_t count = r.u32();
  if (count != expected) {
    throw FormatError("checkpoint: " + std::to_string(count) + " tensors, config needs " +
                      std::to_string(expected));
  }
  model.weights.for_each([&](const std::string& name, TensorD& t) {
    const std::string got = r.bytes(r.u16());
    if (got != name) throw FormatError("checkpoint: expected tensor '" + name + "', found '" + got + "'");
    const std::size_t rank = r.u8();
    Shape shape(rank);
    for (std::size_t& d : shape) d = r.u32();
    if (shape != t.shape()) {
      throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_str(shape) +
                        ", config needs " + shape_str(t.shape()));
    }
    for (double& v : t.storage()) v = r.f32();
  });
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  model.weights.for_each([](const std::string& name, const TensorD& t) {
    if (!t.all_finite()) throw FormatError("checkpoint: non-finite values in '" + name + "'");
  });
  return model;
}

void save_checkpoint(const std::string& path, const Model& model) {
  bin::write_file(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::string& path) { return decode_checkpoint(bin::read_file(path)); }

}  // namespace lbscan::io
