#pragma once

#include <filesystem>
#include <string>

#include "fearec/model.hpp"

// Checkpoint layout (all integers little-endian):
//   8 bytes  magic "FEARECK1"
//   u32      length of the config JSON, then the JSON bytes
//   u32      tensor count
//   per tensor: u32 name length, name bytes, u32 rows, u32 cols,
//               rows*cols float32 values in row-major order
namespace fearec {

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fearec
