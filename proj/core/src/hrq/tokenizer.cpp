// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/hrq/tokenizer.hpp"

#include <spdlog/spdlog.h>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/parallel.hpp"
#include "earthmapper/common/rng.hpp"

namespace emap::hrq {

ScaleSchedule schedule_for_latent(int side) {
  if (side < 1 || (side & (side - 1)) != 0) {
    throw ConfigError("latent side " + std::to_string(side) + " is not a power of two");
  }
  ScaleSchedule s;
  for (int n = 1; n <= side; n *= 2) s.scales.emplace_back(n, n);
  return s;
}

TokenMap Tokenizer::encode(const RgbImage& img) const {
  if (img.width != image_side() || img.height != image_side()) {
    throw ShapeError("tokenizer expects " + std::to_string(image_side()) + "x" + std::to_string(image_side()) +
                     " images, got " + std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  return encode_multiscale(ae.encode(img), cb, sched, depth);
}

FloatImage Tokenizer::decode_partial_float(const TokenMap& tm, int last) const {
  return ae.decode_float(decode_partial(tm, cb, sched, last));
}

nlohmann::json Tokenizer::describe() const {
  nlohmann::json scales = nlohmann::json::array();
  for (const auto& [h, w] : sched.scales) scales.push_back({h, w});
  return {{"latent_dim", ae.config().latent_dim}, {"hidden", ae.config().hidden}, {"patch", ae.config().patch},
          {"K", cb.K}, {"depth", depth}, {"schedule", scales}};
}

namespace {

std::vector<double> subsample(std::vector<double> pooled, int d, int max_samples, std::uint64_t seed) {
  const std::size_t n = pooled.size() / d;
  if (n <= static_cast<std::size_t>(max_samples)) return pooled;
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < max_samples; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(max_samples) * d);
  for (int i = 0; i < max_samples; ++i) {
    const auto* p = pooled.data() + idx[i] * d;
    out.insert(out.end(), p, p + d);
  }
  return out;
}

}  // namespace

Tokenizer train_tokenizer(const std::vector<RgbImage>& images, const TokenizerConfig& cfg,
                          const TokenizerProgress& progress) {
  if (images.empty()) throw UsageError("train_tokenizer: no images");
  if (cfg.depth < 1) throw ConfigError("train_tokenizer: depth must be at least 1");
  Tokenizer tok;
  tok.depth = cfg.depth;
  tok.ae = Autoencoder(cfg.ae, Rng::derive(cfg.seed, 1));
  const int side = images.front().width;
  if (side % tok.ae.downsample() != 0) {
    throw ShapeError("image side " + std::to_string(side) + " not divisible by " +
                     std::to_string(tok.ae.downsample()));
  }
  tok.sched = schedule_for_latent(side / tok.ae.downsample());

  auto tcfg = cfg.train;
  tcfg.seed = Rng::derive(cfg.seed, 2);
  train_autoencoder(tok.ae, images, tcfg, [&](int step, double loss) {
    if (progress) progress("autoencoder", step, loss);
  });

  std::vector<LatentGrid> latents(images.size());
  parallel_for(images.size(), [&](std::size_t i) { latents[i] = tok.ae.encode(images[i]); });
  const int d = cfg.ae.latent_dim;

  std::vector<double> pooled;
  for (const auto& lat : latents) {
    for (int k = 0; k < tok.sched.count(); ++k) {
      const auto r = resize(lat, tok.sched.height(k), tok.sched.width(k));
      pooled.insert(pooled.end(), r.data.begin(), r.data.end());
    }
  }
  auto fit = learn_codebook(subsample(std::move(pooled), d, cfg.max_samples, Rng::derive(cfg.seed, 3)), d, cfg.K,
                            cfg.kmeans_iters, Rng::derive(cfg.seed, 4));
  if (progress) progress("codebook", 0, fit.mse_trace.back());

  for (int round = 1; round <= cfg.refits; ++round) {
    std::vector<std::vector<double>> per_image(latents.size());
    parallel_for(latents.size(), [&](std::size_t i) {
      const auto f = multiscale_residuals(latents[i], fit.codebook, tok.sched, cfg.depth);
      auto& out = per_image[i];
      out = f;
      // Deeper levels quantize what the first picks leave behind.
      for (std::size_t p = 0; p < f.size(); p += d) {
        std::vector<double> r(f.begin() + p, f.begin() + p + d);
        for (int level = 1; level < cfg.depth; ++level) {
          r = quantize_vector(r, fit.codebook, 1).residual;
          out.insert(out.end(), r.begin(), r.end());
        }
      }
    });
    pooled.clear();
    for (const auto& v : per_image) pooled.insert(pooled.end(), v.begin(), v.end());
    fit = learn_codebook(subsample(std::move(pooled), d, cfg.max_samples, Rng::derive(cfg.seed, 10 + round)), d, cfg.K,
                         cfg.kmeans_iters, Rng::derive(cfg.seed, 20 + round));
    if (progress) progress("codebook", round, fit.mse_trace.back());
  }
  tok.cb = std::move(fit.codebook);
  if (!tok.cb.duplicates.empty()) {
    spdlog::warn("codebook has {} duplicated entries; the training latents have too few distinct points",
                 tok.cb.duplicates.size());
  }

  // Usage reflects the token maps of the training images, not the k-means samples.
  tok.cb.usage_counts.assign(static_cast<std::size_t>(tok.cb.K), 0);
  std::vector<int> all;
  for (const auto& lat : latents) {
    const auto tm = encode_multiscale(lat, tok.cb, tok.sched, tok.depth);
    for (const auto& s : tm.scales) all.insert(all.end(), s.begin(), s.end());
  }
  record_usage(tok.cb, all);
  return tok;
}

}  // namespace emap::hrq
