// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace emap::cli {

inline constexpr const char* kWorkspaceEnv = "EARTHMAPPER_WORKSPACE";
inline constexpr const char* kDefaultWorkspace = "earthmapper-workspace";

/// --workspace, else $EARTHMAPPER_WORKSPACE, else ./earthmapper-workspace.
std::filesystem::path resolve_workspace(const std::optional<std::string>& flag);

struct Layout {
  std::filesystem::path root;
  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path manifest() const { return corpus() / "manifest.ndjson"; }
  std::filesystem::path tokenizer() const { return root / "tokenizer.emap"; }
  std::filesystem::path train_dir() const { return root / "train"; }
  std::filesystem::path checkpoint() const { return train_dir() / "latest.emap"; }
  std::filesystem::path generate_dir() const { return root / "generate"; }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path runs_dir() const { return root / "runs"; }
  std::filesystem::path lock_file() const { return root / ".emap.lock"; }
};

class LockBusy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exclusive flock on the workspace lock file, held for the object's lifetime.
class WorkspaceLock {
 public:
  explicit WorkspaceLock(const std::filesystem::path& file);
  ~WorkspaceLock();
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

 private:
  int fd_ = -1;
};

/// Machine-readable record of one invocation, written to runs/ on exit.
class RunRecord {
 public:
  RunRecord(std::string command, const std::vector<std::string>& argv);

  void set_config(nlohmann::json effective) { j_["config"] = std::move(effective); }
  void set_seed(const std::string& name, std::uint64_t v) { j_["seeds"][name] = v; }
  void add_input(const std::filesystem::path& p);
  void add_output(const std::filesystem::path& p);
  void note(const std::string& key, nlohmann::json v) { j_["result"][key] = std::move(v); }
  const nlohmann::json& json() const { return j_; }

  /// Stamps exit code and duration, writes runs/<utc>-<command>-<pid>.json and
  /// returns its path.
  std::filesystem::path write(const std::filesystem::path& runs_dir, int exit_code, const std::string& error = {});

 private:
  nlohmann::json j_;
  std::chrono::steady_clock::time_point t0_;
};

std::string git_hash();

/// Effective configuration rendered back as a config file that the same
/// subcommand accepts with --config.
std::string render_config(const nlohmann::json& tables);

}  // namespace emap::cli
