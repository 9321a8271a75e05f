// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "earthmapper/common/image.hpp"
#include "earthmapper/hrq/multiscale.hpp"
#include "earthmapper/num/adamw.hpp"
#include "earthmapper/num/graph.hpp"
#include "earthmapper/num/params.hpp"

namespace emap::hrq {

struct AutoencoderConfig {
  int latent_dim = 32;
  int hidden = 64;
  int patch = 4;  // two stride-`patch` stages, so the latent is side / patch^2
  bool operator==(const AutoencoderConfig&) const = default;
};

struct AutoencoderTrainConfig {
  int steps = 1500;
  int batch = 8;
  double lr = 2e-3;
  int warmup = 50;
  std::uint64_t seed = 0;
};

/// Two-stage patch convolution encoder and its mirror:
///   encoder: p x p conv (3 -> hidden), GELU, p x p conv (hidden -> latent_dim)
///   decoder: 1 x 1 conv (latent_dim -> p*p*hidden) + pixel shuffle, GELU,
///            1 x 1 conv (hidden -> p*p*3) + pixel shuffle
/// Pixels enter as v/255 - 0.5.
class Autoencoder {
 public:
  Autoencoder() = default;
  Autoencoder(AutoencoderConfig cfg, std::uint64_t seed);

  const AutoencoderConfig& config() const { return cfg_; }
  num::ParamSet<float>& params() { return params_; }
  const num::ParamSet<float>& params() const { return params_; }

  int downsample() const { return cfg_.patch * cfg_.patch; }

  /// Throws ShapeError unless the image is square with a side divisible by patch^2.
  LatentGrid encode(const RgbImage& img) const;
  FloatImage decode_float(const LatentGrid& latent) const;  // values in [0, 1], unclamped
  RgbImage decode(const LatentGrid& latent) const;

  /// Graph pieces over a vertical stack of B equally sized images,
  /// pixels [B*S, S, 3] -> latent [B*S/f, S/f, latent_dim] and back.
  num::Var<float> encode_graph(num::BoundParams<float>& w, num::Var<float> pixels, int side) const;
  num::Var<float> decode_graph(num::BoundParams<float>& w, num::Var<float> latent, int latent_side) const;

 private:
  AutoencoderConfig cfg_;
  num::ParamSet<float> params_;
};

num::Tensor<float> pixels_tensor(const std::vector<const RgbImage*>& images);

using TrainProgress = std::function<void(int step, double loss)>;

/// Pixel-MSE training; batches are drawn from Rng::derive(seed, step) so the
/// run is reproducible. Returns the loss trace.
std::vector<double> train_autoencoder(Autoencoder& ae, const std::vector<RgbImage>& images,
                                      const AutoencoderTrainConfig& cfg, const TrainProgress& progress = {});

}  // namespace emap::hrq
