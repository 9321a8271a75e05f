// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "earthmapper/common/rng.hpp"
#include "earthmapper/num/tensor.hpp"

namespace emap::infer {

enum class KpfVariant { add, substitute };

struct KeyPointConfig {
  double tau = 0.95;  // 1 disables the overwrite
  KpfVariant variant = KpfVariant::add;
  void validate() const;
};

struct GuidanceSchedule {
  enum class Mode { fixed, complexity };
  Mode mode = Mode::complexity;
  double gamma = 1.0;
  double alpha_min = 0.75;
  double alpha_max = 1.25;
  double beta_peak = 0.6;  // normalized complexity C / ln K of the peak response
  double beta_low = 0.8;
  double beta_high = 1.2;
  std::vector<double> fixed;  // per-scale s in fixed mode

  void validate() const;
  static GuidanceSchedule fixed_strengths(std::vector<double> s);
  static GuidanceSchedule map2sat();
  static GuidanceSchedule sat2map();
};

struct SamplerConfig {
  int top_k = 100;
  double top_p = 0.55;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  void validate() const;
};

nlohmann::json to_json(const KeyPointConfig& c);
nlohmann::json to_json(const GuidanceSchedule& g);
nlohmann::json to_json(const SamplerConfig& c);
KeyPointConfig keypoint_config_from_json(const nlohmann::json& j);
GuidanceSchedule guidance_from_json(const nlohmann::json& j);
SamplerConfig sampler_from_json(const nlohmann::json& j);

/// q / (K - 1). Throws ConfigError for K < 2 and IndexError outside [0, K).
std::vector<double> normalize_indices(std::span<const int> q, int K);

/// Positions whose normalized index is strictly above tau.
std::vector<int> select_keypoints(std::span<const double> normed, double tau);

/// Sampled indices with key positions overwritten by clamp(q_G + q_C, 0, K-1),
/// or by q_C under the substitute variant.
std::vector<int> apply_kpf(std::span<const int> q_g, std::span<const int> q_c, std::span<const int> keys, int K,
                           KpfVariant variant = KpfVariant::add);

/// Natural-log entropy of the index histogram; 0 for an empty input.
double complexity(std::span<const int> tokens);

/// s = gamma * alpha(k) * beta(C / ln K), or the per-scale constant in fixed
/// mode (a list shorter or longer than n_scales is spread evenly).
double guidance_strength(int k, int n_scales, double C, int K, const GuidanceSchedule& g);

/// uncond + s (cond - uncond), exact at s = 0 and s = 1.
template <class T>
num::Tensor<T> cfg_blend(const num::Tensor<T>& uncond, const num::Tensor<T>& cond, double s);

/// Indices surviving top-k then top-p filtering, most likely first (ties to
/// the lower index).
std::vector<int> candidate_set(std::span<const double> logits, const SamplerConfig& cfg);

int top_k_top_p_sample(std::span<const double> logits, const SamplerConfig& cfg, Rng& rng);

}  // namespace emap::infer
