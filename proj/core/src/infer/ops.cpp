// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/infer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "earthmapper/common/error.hpp"

namespace emap::infer {

void KeyPointConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("key point threshold must lie in [0, 1]");
}

void GuidanceSchedule::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("guidance gamma must be non-negative");
  if (!(alpha_min <= alpha_max)) throw ConfigError("guidance alpha_min exceeds alpha_max");
  if (!(beta_peak > 0.0 && beta_peak < 1.0)) throw ConfigError("guidance beta_peak must lie in (0, 1)");
  if (mode == Mode::fixed) {
    if (fixed.empty()) throw ConfigError("fixed guidance needs one strength per scale");
    for (double s : fixed)
      if (!std::isfinite(s)) throw ConfigError("fixed guidance strengths must be finite");
  }
}

GuidanceSchedule GuidanceSchedule::fixed_strengths(std::vector<double> s) {
  GuidanceSchedule g;
  g.mode = Mode::fixed;
  g.fixed = std::move(s);
  return g;
}

// alpha and beta both straddle 1, so the complexity schedule ranges around
// gamma and gamma sits at the fixed-mode optimum for each direction.
GuidanceSchedule GuidanceSchedule::map2sat() {
  GuidanceSchedule g;
  g.gamma = 8.0;
  return g;
}

GuidanceSchedule GuidanceSchedule::sat2map() {
  GuidanceSchedule g;
  g.gamma = 2.0;
  return g;
}

void SamplerConfig::validate() const {
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
}

nlohmann::json to_json(const KeyPointConfig& c) {
  return {{"tau", c.tau}, {"variant", c.variant == KpfVariant::add ? "add" : "substitute"}};
}

nlohmann::json to_json(const GuidanceSchedule& g) {
  nlohmann::json j{{"mode", g.mode == GuidanceSchedule::Mode::fixed ? "fixed" : "complexity"}};
  if (g.mode == GuidanceSchedule::Mode::fixed) {
    j["fixed"] = g.fixed;
  } else {
    j.update({{"gamma", g.gamma},
              {"alpha_min", g.alpha_min},
              {"alpha_max", g.alpha_max},
              {"beta_peak", g.beta_peak},
              {"beta_low", g.beta_low},
              {"beta_high", g.beta_high}});
  }
  return j;
}

nlohmann::json to_json(const SamplerConfig& c) {
  return {{"top_k", c.top_k}, {"top_p", c.top_p}, {"temperature", c.temperature}, {"seed", c.seed}};
}

KeyPointConfig keypoint_config_from_json(const nlohmann::json& j) {
  KeyPointConfig c;
  c.tau = j.value("tau", c.tau);
  const std::string v = j.value("variant", "add");
  if (v != "add" && v != "substitute") throw ConfigError("unknown key point variant '" + v + "'");
  c.variant = v == "add" ? KpfVariant::add : KpfVariant::substitute;
  c.validate();
  return c;
}

GuidanceSchedule guidance_from_json(const nlohmann::json& j) {
  GuidanceSchedule g;
  const std::string mode = j.value("mode", "complexity");
  if (mode == "fixed") {
    g.mode = GuidanceSchedule::Mode::fixed;
    g.fixed = j.at("fixed").get<std::vector<double>>();
  } else if (mode == "complexity") {
    g.gamma = j.value("gamma", g.gamma);
    g.alpha_min = j.value("alpha_min", g.alpha_min);
    g.alpha_max = j.value("alpha_max", g.alpha_max);
    g.beta_peak = j.value("beta_peak", g.beta_peak);
    g.beta_low = j.value("beta_low", g.beta_low);
    g.beta_high = j.value("beta_high", g.beta_high);
  } else {
    throw ConfigError("unknown guidance mode '" + mode + "'");
  }
  g.validate();
  return g;
}

SamplerConfig sampler_from_json(const nlohmann::json& j) {
  SamplerConfig c;
  c.top_k = j.value("top_k", c.top_k);
  c.top_p = j.value("top_p", c.top_p);
  c.temperature = j.value("temperature", c.temperature);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::vector<double> normalize_indices(std::span<const int> q, int K) {
  if (K < 2) throw ConfigError("normalize_indices: K must be at least 2");
  std::vector<double> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < 0 || q[i] >= K) throw IndexError("normalize_indices: index " + std::to_string(q[i]) + " outside [0, K)");
    out[i] = static_cast<double>(q[i]) / (K - 1);
  }
  return out;
}

std::vector<int> select_keypoints(std::span<const double> normed, double tau) {
  std::vector<int> keys;
  for (std::size_t i = 0; i < normed.size(); ++i)
    if (normed[i] > tau) keys.push_back(static_cast<int>(i));
  return keys;
}

std::vector<int> apply_kpf(std::span<const int> q_g, std::span<const int> q_c, std::span<const int> keys, int K,
                           KpfVariant variant) {
  if (q_g.size() != q_c.size()) throw ShapeError("apply_kpf: sampled and conditional lengths differ");
  std::vector<int> out(q_g.begin(), q_g.end());
  for (int i : keys) {
    if (i < 0 || i >= static_cast<int>(out.size())) throw IndexError("apply_kpf: key position out of range");
    out[i] = variant == KpfVariant::add ? std::clamp(q_g[i] + q_c[i], 0, K - 1) : q_c[i];
  }
  return out;
}

double complexity(std::span<const int> tokens) {
  if (tokens.empty()) return 0.0;
  std::map<int, std::int64_t> hist;
  for (int t : tokens) ++hist[t];
  const double n = static_cast<double>(tokens.size());
  double h = 0.0;
  for (const auto& [idx, count] : hist) {
    const double p = count / n;
    h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

double guidance_strength(int k, int n_scales, double C, int K, const GuidanceSchedule& g) {
  if (g.mode == GuidanceSchedule::Mode::fixed) {
    const auto m = static_cast<std::int64_t>(g.fixed.size());
    const auto idx = n_scales > 0 ? static_cast<std::int64_t>(k) * m / n_scales : 0;
    return g.fixed[static_cast<std::size_t>(std::clamp<std::int64_t>(idx, 0, m - 1))];
  }
  if (g.gamma == 0.0) return 0.0;
  const double alpha =
      n_scales > 1 ? g.alpha_min + (g.alpha_max - g.alpha_min) * k / static_cast<double>(n_scales - 1) : g.alpha_min;
  const double c = K > 1 ? std::clamp(C / std::log(static_cast<double>(K)), 0.0, 1.0) : 0.0;
  const double mid = 0.5 * (g.beta_low + g.beta_high);
  const double beta = c <= g.beta_peak
                          ? g.beta_low + (g.beta_high - g.beta_low) * c / g.beta_peak
                          : g.beta_high + (mid - g.beta_high) * (c - g.beta_peak) / (1.0 - g.beta_peak);
  return g.gamma * alpha * beta;
}

template <class T>
num::Tensor<T> cfg_blend(const num::Tensor<T>& uncond, const num::Tensor<T>& cond, double s) {
  if (uncond.shape != cond.shape) {
    throw ShapeError("cfg_blend: shapes " + num::to_string(uncond.shape) + " and " + num::to_string(cond.shape) +
                     " differ");
  }
  num::Tensor<T> out(uncond.shape);
  const T t = static_cast<T>(s);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::lerp(uncond.data[i], cond.data[i], t);
  return out;
}

template num::Tensor<float> cfg_blend(const num::Tensor<float>&, const num::Tensor<float>&, double);
template num::Tensor<double> cfg_blend(const num::Tensor<double>&, const num::Tensor<double>&, double);

namespace {

struct Filtered {
  std::vector<int> idx;
  std::vector<double> prob;  // renormalized over idx
};

Filtered filter(std::span<const double> logits, const SamplerConfig& cfg) {
  cfg.validate();
  if (logits.empty()) throw ShapeError("sampler: empty logits");
  for (double v : logits)
    if (!std::isfinite(v)) throw TrainingError("sampler: non-finite logit");
  std::vector<int> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](int a, int b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
  order.resize(k);

  const double mx = logits[order[0]];
  std::vector<double> w(k);
  double z = 0.0;
  for (std::size_t i = 0; i < k; ++i) z += w[i] = std::exp((logits[order[i]] - mx) / cfg.temperature);
  Filtered f;
  double cum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    f.idx.push_back(order[i]);
    f.prob.push_back(w[i] / z);
    cum += w[i] / z;
    if (cum >= cfg.top_p) break;
  }
  const double kept = std::accumulate(f.prob.begin(), f.prob.end(), 0.0);
  for (auto& p : f.prob) p /= kept;
  return f;
}

}  // namespace

std::vector<int> candidate_set(std::span<const double> logits, const SamplerConfig& cfg) {
  return filter(logits, cfg).idx;
}

int top_k_top_p_sample(std::span<const double> logits, const SamplerConfig& cfg, Rng& rng) {
  const auto f = filter(logits, cfg);
  if (f.idx.size() == 1) return f.idx[0];
  return f.idx[rng.categorical(f.prob)];
}

}  // namespace emap::infer
