// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/geotile/fetch.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/hash.hpp"
#include "earthmapper/common/image.hpp"

namespace emap::geotile {

EndpointTemplate EndpointTemplate::parse(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("tile endpoint '" + url + "' has no scheme");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("tile endpoint scheme must be http or https: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos || path_start == scheme_end + 3) {
    throw ConfigError("tile endpoint '" + url + "' has no host or path");
  }
  EndpointTemplate e{url.substr(0, path_start), url.substr(path_start)};
  for (const char* ph : {"{z}", "{x}", "{y}"}) {
    if (e.path_template.find(ph) == std::string::npos) {
      throw ConfigError("tile endpoint '" + url + "' lacks the " + ph + " placeholder");
    }
  }
  return e;
}

std::string EndpointTemplate::path_for(const TileId& t) const {
  std::string out = path_template;
  auto sub = [&out](const std::string& ph, const std::string& v) {
    for (auto pos = out.find(ph); pos != std::string::npos; pos = out.find(ph, pos + v.size())) {
      out.replace(pos, ph.size(), v);
    }
  };
  sub("{z}", std::to_string(t.zoom));
  sub("{x}", std::to_string(t.x));
  sub("{y}", std::to_string(t.y));
  return out;
}

// std::counting_semaphore needs a compile-time maximum; a small monitor is simpler.
struct TileFetcher::Budget {
  std::mutex mu;
  std::condition_variable cv;
  int available;
  explicit Budget(int n) : available(n) {}
  void acquire() {
    std::unique_lock lock(mu);
    cv.wait(lock, [this] { return available > 0; });
    --available;
  }
  void release() {
    {
      std::lock_guard lock(mu);
      ++available;
    }
    cv.notify_one();
  }
};

TileFetcher::TileFetcher(FetchConfig cfg)
    : cfg_(std::move(cfg)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      budget_(std::make_unique<Budget>(std::max(1, cfg_.max_in_flight))) {
  if (cfg_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
}

TileFetcher::~TileFetcher() = default;

std::filesystem::path TileFetcher::cache_path(const std::string& url_template, const TileId& t) const {
  const std::string key =
      url_template + "\n" + std::to_string(t.zoom) + "/" + std::to_string(t.x) + "/" + std::to_string(t.y);
  const std::string h = sha256_hex(key);
  return cfg_.cache_dir / h.substr(0, 2) / (h + ".bin");
}

std::vector<std::uint8_t> TileFetcher::fetch(const std::string& url_template, const TileId& t) {
  validate(t);
  const EndpointTemplate ep = EndpointTemplate::parse(url_template);
  const auto cached = cfg_.cache_dir.empty() ? std::filesystem::path{} : cache_path(url_template, t);
  if (!cached.empty() && std::filesystem::exists(cached)) {
    ++cache_hits_;
    return read_file(cached);
  }

  const std::string path = ep.path_for(t);
  int status = -1;
  int attempt = 0;
  std::string last_error;
  for (attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
    budget_->acquire();
    const int now = ++in_flight_;
    int peak = peak_in_flight_.load();
    while (now > peak && !peak_in_flight_.compare_exchange_weak(peak, now)) {
    }
    ++network_requests_;
    httplib::Result res;
    {
      httplib::Client client(ep.scheme_host_port);
      client.set_connection_timeout(cfg_.timeout);
      client.set_read_timeout(cfg_.timeout);
      client.set_follow_location(true);
      res = client.Get(path);
    }
    --in_flight_;
    budget_->release();

    if (res) {
      status = res->status;
      if (status == 200) {
        std::vector<std::uint8_t> bytes(res->body.begin(), res->body.end());
        if (!cached.empty()) write_file_atomic(cached, bytes);
        return bytes;
      }
      last_error = "HTTP " + std::to_string(status);
      // Client errors other than throttling will not improve on retry.
      if (status >= 400 && status < 500 && status != 429) break;
    } else {
      status = -1;
      last_error = httplib::to_string(res.error());
    }
    if (attempt < cfg_.max_attempts) {
      auto delay = cfg_.base_backoff * (1LL << (attempt - 1));
      delay = std::min<std::chrono::milliseconds>(delay, cfg_.max_backoff);
      spdlog::debug("tile {}/{}/{} attempt {} failed ({}); retrying in {} ms", t.zoom, t.x, t.y, attempt, last_error,
                    delay.count());
      sleeper_(delay);
    }
  }
  const int attempts = std::min(attempt, cfg_.max_attempts);
  throw FetchError("fetching " + ep.scheme_host_port + path + " failed after " + std::to_string(attempts) +
                       " attempt(s): " + last_error,
                   status, attempts);
}

}  // namespace emap::geotile
