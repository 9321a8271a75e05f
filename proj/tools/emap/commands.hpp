// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "run_config.hpp"
#include "workspace.hpp"

namespace emap::cli {

struct Context {
  Layout ws;
  RunConfig cfg;
  RunRecord* record = nullptr;
  nlohmann::json effective = nlohmann::json::object();  // section -> key -> value actually used
};

/// Resolves one section's values (flag > config > default) and echoes each
/// into the effective config, which the run record stores.
class Resolver {
 public:
  Resolver(Context& ctx, std::string section) : ctx_(ctx), section_(std::move(section)) {}

  template <class T>
  T operator()(const char* key, const std::optional<T>& flag, T fallback) {
    T v = pick(flag, ctx_.cfg, section_, key, std::move(fallback));
    ctx_.effective[section_][key] = v;
    return v;
  }

  template <class T>
  std::optional<T> optional(const char* key, const std::optional<T>& flag) {
    std::optional<T> v = flag;
    if (!v && ctx_.cfg.has(section_, key)) v = ctx_.cfg.get(section_, key).template get<T>();
    if (v) ctx_.effective[section_][key] = *v;
    return v;
  }

  std::filesystem::path path(const char* key, const std::optional<std::string>& flag,
                             const std::filesystem::path& fallback) {
    auto p = std::filesystem::absolute(pick_path(flag, ctx_.cfg, section_, key, fallback)).lexically_normal();
    ctx_.effective[section_][key] = p.string();
    return p;
  }

  std::optional<std::filesystem::path> optional_path(const char* key, const std::optional<std::string>& flag) {
    auto s = optional<std::string>(key, flag);
    if (!s) return std::nullopt;
    auto p = std::filesystem::absolute(*s).lexically_normal();
    ctx_.effective[section_][key] = p.string();
    return p;
  }

 private:
  Context& ctx_;
  std::string section_;
};

struct SplitFlags {
  std::optional<double> train, val, test;
  std::optional<std::uint64_t> seed;
};

struct TileOptions {
  std::optional<std::string> sat, map, out, city;
  std::optional<int> zoom, tile_px;
  std::optional<std::int64_t> x0, y0;
  std::optional<double> min_diversity;
  std::optional<bool> cloud_filter;
  SplitFlags split;
};

struct FetchOptions {
  std::optional<std::string> endpoint_sat, endpoint_map, out, cache, city;
  std::optional<double> lat_min, lat_max, lon_min, lon_max, min_diversity;
  std::optional<int> zoom, max_in_flight, attempts;
  std::optional<bool> cloud_filter;
  SplitFlags split;
};

struct SynthOptions {
  std::optional<std::string> out, city;
  std::optional<int> n, size, snap, max_roads, noise_cell;
  SplitFlags split;
};

struct TokenizerOptions {
  std::optional<std::string> manifest, out;
  std::optional<int> K, depth, latent_dim, hidden, patch, steps, batch, kmeans_iters, refits, max_samples, max_images;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
};

struct TrainOptions {
  std::optional<std::string> manifest, tokenizer, out;
  std::optional<int> layers, width, heads, mlp_ratio, batch, geo_dims, teacher_hidden, d_sem;
  std::optional<std::int64_t> steps, warmup, checkpoint_every;
  std::optional<double> lr, weight_decay, grad_clip, sigma, geo_dropout, cond_dropout;
  std::optional<std::uint64_t> seed, teacher_seed;
  std::optional<bool> resume;
};

struct SamplingFlags {
  std::optional<std::uint64_t> seed;
  std::optional<double> tau, gamma, top_p, temperature;
  std::optional<std::string> kpf_variant;
  std::optional<std::vector<double>> guidance_fixed;
  std::optional<int> top_k;
};

struct GenerateOptions {
  std::optional<std::string> checkpoint, mode, cond, image, mask, target, out;
  std::optional<double> lat, lon;
  SamplingFlags sampling;
};

struct EvalOptions {
  std::optional<std::string> checkpoint, manifest, split, direction, out;
  std::optional<int> limit;
  SamplingFlags sampling;
};

CLI::App* add_tile(CLI::App& app, TileOptions& o);
CLI::App* add_fetch(CLI::App& app, FetchOptions& o);
CLI::App* add_synth(CLI::App& app, SynthOptions& o);
CLI::App* add_train_tokenizer(CLI::App& app, TokenizerOptions& o);
CLI::App* add_train(CLI::App& app, TrainOptions& o);
CLI::App* add_generate(CLI::App& app, GenerateOptions& o);
CLI::App* add_eval(CLI::App& app, EvalOptions& o);

void run_tile(const TileOptions& o, Context& ctx);
void run_fetch(const FetchOptions& o, Context& ctx);
void run_synth(const SynthOptions& o, Context& ctx);
void run_train_tokenizer(const TokenizerOptions& o, Context& ctx);
void run_train(const TrainOptions& o, Context& ctx);
void run_generate(const GenerateOptions& o, Context& ctx);
void run_eval(const EvalOptions& o, Context& ctx);

}  // namespace emap::cli
