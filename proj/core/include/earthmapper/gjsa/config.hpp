// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

#include "earthmapper/hrq/multiscale.hpp"

namespace emap::gjsa {

struct ModelConfig {
  int layers = 6;
  int width = 256;
  int heads = 8;
  int mlp_ratio = 4;
  hrq::ScaleSchedule schedule = hrq::ScaleSchedule::standard();
  int vocab = 512;       // K
  int depth = 2;         // D parallel heads per slot
  int latent_dim = 32;   // codebook vector size
  int d_sem = 64;        // teacher channels
  int geo_dims = 64;     // sinusoidal dims per coordinate
  double sigma = 0.5;    // semantic loss weight
  double geo_dropout = 0.1;
  double cond_dropout = 0.1;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace emap::gjsa
