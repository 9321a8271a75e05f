// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/gjsa/config.hpp"

#include <string>

#include "earthmapper/common/error.hpp"

namespace emap::gjsa {

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model config: " + what);
  };
  need(layers >= 1, "layers must be positive");
  need(width >= 1 && heads >= 1 && width % heads == 0, "width " + std::to_string(width) +
                                                            " is not divisible by heads " + std::to_string(heads));
  need(mlp_ratio >= 1, "mlp_ratio must be positive");
  need(vocab >= 2, "vocab must be at least 2");
  need(depth >= 1, "depth must be at least 1");
  need(latent_dim >= 1 && d_sem >= 1, "latent_dim and d_sem must be positive");
  need(geo_dims >= 2 && geo_dims % 2 == 0, "geo_dims must be even");
  need(sigma >= 0.0, "sigma must be non-negative");
  need(geo_dropout >= 0.0 && geo_dropout <= 1.0 && cond_dropout >= 0.0 && cond_dropout <= 1.0,
       "dropout rates must lie in [0, 1]");
  try {
    schedule.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json scales = nlohmann::json::array();
  for (const auto& [h, w] : c.schedule.scales) scales.push_back({h, w});
  return {{"layers", c.layers},         {"width", c.width},
          {"heads", c.heads},           {"mlp_ratio", c.mlp_ratio},
          {"schedule", scales},         {"vocab", c.vocab},
          {"depth", c.depth},           {"latent_dim", c.latent_dim},
          {"d_sem", c.d_sem},           {"geo_dims", c.geo_dims},
          {"sigma", c.sigma},           {"geo_dropout", c.geo_dropout},
          {"cond_dropout", c.cond_dropout}, {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.layers = j.at("layers");
    c.width = j.at("width");
    c.heads = j.at("heads");
    c.mlp_ratio = j.at("mlp_ratio");
    c.schedule.scales.clear();
    for (const auto& s : j.at("schedule")) c.schedule.scales.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
    c.vocab = j.at("vocab");
    c.depth = j.at("depth");
    c.latent_dim = j.at("latent_dim");
    c.d_sem = j.at("d_sem");
    c.geo_dims = j.at("geo_dims");
    c.sigma = j.at("sigma");
    c.geo_dropout = j.at("geo_dropout");
    c.cond_dropout = j.at("cond_dropout");
    c.seed = j.at("seed");
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("model config: ") + e.what());
  }
}

}  // namespace emap::gjsa
