#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "abibench/autodiff.hpp"

namespace abibench::harness {

// Checkpoint layout: 8-byte magic, little-endian u32 JSON header length, the
// header (config, config hash, tensor names and shapes), then row-major f64
// payloads in header order.
struct Checkpoint {
  ad::ParamStore params;
  nlohmann::json config;
  std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, const ad::ParamStore& params,
                     const nlohmann::json& config, const std::string& config_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace abibench::harness
