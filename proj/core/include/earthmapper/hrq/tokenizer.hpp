// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earthmapper/hrq/autoencoder.hpp"
#include "earthmapper/hrq/codebook.hpp"
#include "earthmapper/hrq/multiscale.hpp"

namespace emap::hrq {

struct TokenizerConfig {
  AutoencoderConfig ae;
  AutoencoderTrainConfig train;
  int K = 512;
  int depth = 2;
  int kmeans_iters = 20;
  /// Codebook refits on the residuals the previous codebook leaves behind.
  int refits = 2;
  /// Cap on k-means samples per fit (uniformly subsampled).
  int max_samples = 60000;
  std::uint64_t seed = 0;
};

/// 1x1, 2x2, ..., side x side for a power-of-two latent side.
ScaleSchedule schedule_for_latent(int side);

/// Autoencoder + shared codebook + schedule: image <-> token map.
struct Tokenizer {
  Autoencoder ae;
  Codebook cb;
  ScaleSchedule sched;
  int depth = 2;

  int image_side() const { return sched.scales.back().first * ae.downsample(); }
  TokenMap encode(const RgbImage& img) const;
  LatentGrid latent(const TokenMap& tm) const { return decode_multiscale(tm, cb, sched); }
  FloatImage decode_float(const TokenMap& tm) const { return ae.decode_float(latent(tm)); }
  RgbImage decode(const TokenMap& tm) const { return ae.decode(latent(tm)); }
  /// Image of the reconstruction through scale `last` only.
  FloatImage decode_partial_float(const TokenMap& tm, int last) const;

  nlohmann::json describe() const;
};

using TokenizerProgress = std::function<void(const std::string& stage, int step, double value)>;

/// Trains the autoencoder on all images, then fits the codebook: first on raw
/// latents at every scale, then `refits` times on the multi-scale and depth
/// residuals produced by the previous codebook.
Tokenizer train_tokenizer(const std::vector<RgbImage>& images, const TokenizerConfig& cfg,
                          const TokenizerProgress& progress = {});

}  // namespace emap::hrq
