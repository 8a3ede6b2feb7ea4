#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fearec/losses.hpp"
#include "fearec/model.hpp"
#include "fearec/training.hpp"

namespace fearec {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ModelConfig model;
  training::TrainConfig train;
  losses::LossWeights weights;
  std::filesystem::path dataset;  // processed dataset file
  std::filesystem::path out_dir = "run";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool exclude_seen = true;

  // Applies one key=value assignment. Unknown keys and malformed values throw ConfigError.
  void set(const std::string& key, const std::string& value);
  // Lines of "key = value" in a fixed order; feeding them back to set()
  // reproduces this configuration.
  std::string to_text() const;
  void validate_for_training() const;

  static std::vector<std::string> keys();
};

// Parses "key = value" lines; blank lines and lines starting with '#' are skipped.
RunConfig load_run_config(const std::filesystem::path& path);
void apply_text(RunConfig& cfg, const std::string& text, const std::string& origin);
// Parses "key=value" from a command-line override.
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace fearec
