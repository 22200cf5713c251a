#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

namespace epwa {

// Full default configuration; `config --print-defaults` emits this.
nlohmann::ordered_json default_config();

// Parse a config file and deep-merge it over the defaults. Relative input
// paths later resolve against the config file's directory.
nlohmann::ordered_json load_config(const std::string& path);

struct RunOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

// Pipeline commands. Each writes its outputs plus a manifest
// (manifest_<command>.json) with a SHA-256 checksum per output file.
// Errors surface as epwa::Error (invalid -> 2, io -> 3, numeric -> 4).
void cmd_features(const std::string& config_path, const RunOverrides& ov = {});
void cmd_fit(const std::string& config_path, const RunOverrides& ov = {});
void cmd_validate(const std::string& config_path, const RunOverrides& ov = {});
void cmd_deploy(const std::string& config_path, const RunOverrides& ov = {});

}  // namespace epwa
