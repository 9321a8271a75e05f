// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "earthmapper/geotile/projection.hpp"

namespace emap::geotile {

struct EndpointTemplate {
  std::string scheme_host_port;  // "http://host:port"
  std::string path_template;     // "/tiles/{z}/{x}/{y}.png"

  /// Requires an http(s) URL containing {z}, {x} and {y}; throws ConfigError otherwise.
  static EndpointTemplate parse(const std::string& url_template);
  std::string path_for(const TileId& t) const;
};

struct FetchConfig {
  std::filesystem::path cache_dir;
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{200};
  std::chrono::milliseconds max_backoff{2000};
  std::chrono::seconds timeout{20};
  int max_in_flight = 8;
};

/// Tile-server client with retries, a request budget, and an on-disk cache.
///
/// Cache entries live at cache_dir/<h[0:2]>/<h>.bin where h is the SHA-256 of
/// the endpoint template and tile address; they never expire. Safe to call
/// from many threads.
class TileFetcher {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit TileFetcher(FetchConfig cfg);
  ~TileFetcher();
  TileFetcher(const TileFetcher&) = delete;
  TileFetcher& operator=(const TileFetcher&) = delete;

  /// Raw encoded bytes. Throws FetchError after the last failed attempt.
  std::vector<std::uint8_t> fetch(const std::string& url_template, const TileId& t);

  std::filesystem::path cache_path(const std::string& url_template, const TileId& t) const;

  /// Replaces the backoff sleep (tests use a recorder).
  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }

  std::uint64_t network_requests() const { return network_requests_.load(); }
  std::uint64_t cache_hits() const { return cache_hits_.load(); }
  int peak_in_flight() const { return peak_in_flight_.load(); }

 private:
  struct Budget;
  FetchConfig cfg_;
  Sleeper sleeper_;
  std::unique_ptr<Budget> budget_;
  std::atomic<std::uint64_t> network_requests_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_in_flight_{0};
};

}  // namespace emap::geotile
