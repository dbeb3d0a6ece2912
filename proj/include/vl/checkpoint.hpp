#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "vl/model.hpp"

namespace vl {

/// Model parameters, optimizer momentum and training metadata.
///
/// On disk (all integers little-endian):
///   "VLCK" | version u32 | tensor count u32
///   per tensor: name length u32, UTF-8 name, rank u32, dims u32 x rank,
///               values f64 x prod(dims)
///   metadata length u32 | UTF-8 "key=value\n" lines
/// Momentum buffers are stored as tensors named "mom/<parameter>". The model
/// configuration travels in the metadata block under "model.*" keys.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig model;
  ParameterSet parameters;
  ParameterSet momentum;
  std::map<std::string, std::string> metadata;  // phase, epoch, seed, ...

  Model to_model() const { return Model(model, parameters); }
};

bool bit_equal(const ParameterSet& a, const ParameterSet& b);
bool bit_equal(const Checkpoint& a, const Checkpoint& b);

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// `origin` names the source in error messages.
Checkpoint deserialize_checkpoint(const std::string& bytes,
                                  const std::filesystem::path& origin = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vl
