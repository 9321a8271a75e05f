// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace emap::cli {

enum class Kind { integer, real, boolean, string, path, reals };

struct KeySpec {
  const char* key;
  Kind kind;
};

/// Declared keys per section; anything else in a config file is rejected.
const std::vector<std::pair<std::string, std::vector<KeySpec>>>& config_schema();

/// Parsed [tile] [tokenizer] [model] [infer] [eval] tables. Path values are
/// already resolved against the config file's directory.
class RunConfig {
 public:
  RunConfig() = default;
  static RunConfig load(const std::filesystem::path& file);
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir);

  bool has(const std::string& section, const std::string& key) const;
  const nlohmann::json& get(const std::string& section, const std::string& key) const;
  const nlohmann::json& tables() const { return tables_; }
  const std::filesystem::path& source() const { return source_; }

 private:
  nlohmann::json tables_ = nlohmann::json::object();
  std::filesystem::path source_;
};

/// flag > config > default.
template <class T>
T pick(const std::optional<T>& flag, const RunConfig& cfg, const std::string& section, const std::string& key,
       T fallback) {
  if (flag) return *flag;
  if (cfg.has(section, key)) return cfg.get(section, key).get<T>();
  return fallback;
}

inline std::filesystem::path pick_path(const std::optional<std::string>& flag, const RunConfig& cfg,
                                       const std::string& section, const std::string& key,
                                       const std::filesystem::path& fallback) {
  if (flag) return std::filesystem::path(*flag);
  if (cfg.has(section, key)) return std::filesystem::path(cfg.get(section, key).get<std::string>());
  return fallback;
}

}  // namespace emap::cli
