#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cecmmr/experiment.hpp"

namespace cecmmr {

/// Canonical JSON form of a config. Every field is written, so the dump is a
/// stable key for hashing.
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Unknown keys are rejected. Relative dataset paths resolve against `base_dir`.
/// A dataset of kind "manifest" is resolved to the CSV it names, and its split
/// preset is used when the config has no "split" entry.
ExperimentConfig config_from_json(const nlohmann::json& json,
                                  const std::filesystem::path& base_dir = {});

/// TOML document as the equivalent JSON tree.
nlohmann::json toml_to_json(std::string_view text, const std::string& source = "config");

/// Reads a .json or .toml config file.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Command-line overrides, applied after the file is read.
struct ConfigOverrides {
  std::optional<std::string> loss;
  std::optional<std::size_t> components;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool literal_loss = false;
};

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides);

}  // namespace cecmmr
