// SPDX-License-Identifier: Apache-2.0
#include "workspace.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "earthmapper/common/hash.hpp"
#include "earthmapper/common/image.hpp"

#ifndef EMAP_GIT_HASH
#define EMAP_GIT_HASH "unknown"
#endif

namespace emap::cli {

std::filesystem::path resolve_workspace(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return std::filesystem::absolute(*flag);
  if (const char* env = std::getenv(kWorkspaceEnv); env && *env) return std::filesystem::absolute(env);
  return std::filesystem::absolute(kDefaultWorkspace);
}

WorkspaceLock::WorkspaceLock(const std::filesystem::path& file) {
  std::filesystem::create_directories(file.parent_path());
  fd_ = ::open(file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open lock file " + file.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw LockBusy("workspace is in use by another emap process (" + file.string() + ")");
  }
  const auto pid = std::to_string(::getpid()) + "\n";
  if (::ftruncate(fd_, 0) == 0) {
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
}

WorkspaceLock::~WorkspaceLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

std::string git_hash() { return EMAP_GIT_HASH; }

namespace {

std::string utc_stamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

nlohmann::json file_entry(const std::filesystem::path& p) {
  nlohmann::json e{{"path", std::filesystem::absolute(p).lexically_normal().string()}};
  std::error_code ec;
  if (std::filesystem::is_regular_file(p, ec)) {
    e["sha256"] = sha256_file(p);
    e["bytes"] = std::filesystem::file_size(p);
  } else if (std::filesystem::is_directory(p, ec)) {
    e["directory"] = true;
  } else {
    e["missing"] = true;
  }
  return e;
}

std::string toml_value(const nlohmann::json& v) {
  if (v.is_string()) {
    std::string out = "\"";
    for (char c : v.get<std::string>()) {
      if (c == '"' || c == '\\') out += '\\';
      if (c == '\n') {
        out += "\\n";
        continue;
      }
      out += c;
    }
    return out + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) {
    auto s = fmt::format("{}", v.get<double>());
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml_value(v[i]);
    return out + "]";
  }
  return v.dump();
}

}  // namespace

RunRecord::RunRecord(std::string command, const std::vector<std::string>& argv)
    : t0_(std::chrono::steady_clock::now()) {
  j_ = {{"command", std::move(command)},
        {"argv", argv},
        {"git", git_hash()},
        {"started_utc", utc_stamp()},
        {"config", nlohmann::json::object()},
        {"seeds", nlohmann::json::object()},
        {"inputs", nlohmann::json::array()},
        {"outputs", nlohmann::json::array()},
        {"result", nlohmann::json::object()}};
  std::error_code ec;
  j_["cwd"] = std::filesystem::current_path(ec).string();
}

void RunRecord::add_input(const std::filesystem::path& p) { j_["inputs"].push_back(file_entry(p)); }
void RunRecord::add_output(const std::filesystem::path& p) { j_["outputs"].push_back(file_entry(p)); }

std::filesystem::path RunRecord::write(const std::filesystem::path& runs_dir, int exit_code, const std::string& error) {
  j_["exit_code"] = exit_code;
  if (!error.empty()) j_["error"] = error;
  j_["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  j_["config_file"] = render_config(j_["config"]);
  std::filesystem::create_directories(runs_dir);
  const auto path =
      runs_dir / fmt::format("{}-{}-{}.json", j_["started_utc"].get<std::string>(), j_["command"].get<std::string>(),
                             ::getpid());
  const auto text = j_.dump(2) + "\n";
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return path;
}

std::string render_config(const nlohmann::json& tables) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : tables.items()) {
    if (!keys.is_object() || keys.empty()) continue;
    if (!first) out << "\n";
    first = false;
    out << "[" << section << "]\n";
    for (const auto& [k, v] : keys.items()) {
      if (v.is_null()) continue;
      out << k << " = " << toml_value(v) << "\n";
    }
  }
  return out.str();
}

}  // namespace emap::cli
