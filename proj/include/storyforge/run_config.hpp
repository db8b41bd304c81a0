// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "storyforge/diagnostics.hpp"
#include "storyforge/synth.hpp"
#include "storyforge/trainer.hpp"

namespace storyforge {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognized key, in the order used when writing a resolved config.
const std::vector<ConfigKey>& config_keys();

/// Key-value run configuration. Keys use dashes; underscores are accepted and
/// normalized. Later sources override earlier ones: defaults, then a config
/// file, then command-line flags.
class RunConfig {
 public:
  RunConfig();

  /// Throws ConfigError for unknown keys.
  void set(const std::string& key, const std::string& value);
  /// Overrides a default without marking the key as explicitly set.
  void set_default(const std::string& key, const std::string& value);
  bool explicitly_set(const std::string& key) const;

  /// Text format: one "key = value" per line; blank lines and lines starting
  /// with '#' are ignored. Throws FormatError (with line number) on malformed
  /// lines and ConfigError on unknown keys.
  void load_file(const std::filesystem::path& path);

  const std::string& get(const std::string& key) const;
  std::string path(const std::string& key) const { return get(key); }
  /// Throws ConfigError when the key is empty.
  std::string require(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  /// Resolved configuration in the file format, keys in table order.
  std::string dump(const std::string& command) const;
  void write(const std::filesystem::path& path, const std::string& command) const;

  ModelConfig model_config(std::size_t vocab_size, std::size_t feature_dim) const;
  TrainConfig train_config(const ModelConfig& model) const;
  SynthSpec synth_spec() const;
  PipelineCheckSpec pipeline_check_spec() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

std::string normalize_key(std::string key);

}  // namespace storyforge
