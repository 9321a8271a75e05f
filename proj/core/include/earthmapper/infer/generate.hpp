// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earthmapper/common/image.hpp"
#include "earthmapper/gjsa/model.hpp"
#include "earthmapper/hrq/tokenizer.hpp"
#include "earthmapper/infer/ops.hpp"

namespace emap::infer {

enum class Mode { map2sat, sat2map, coord_only, inpaint, outpaint };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);  // UsageError on unknown names

/// Partially generated token maps of both modalities. Scales past `filled`
/// hold zeros.
struct Canvas {
  hrq::TokenMap sat;
  hrq::TokenMap map;
  int filled = 0;

  static Canvas empty(const hrq::ScaleSchedule& sched, int depth);
  hrq::TokenMap& of(int modality) { return modality == gjsa::kSat ? sat : map; }
  const hrq::TokenMap& of(int modality) const { return modality == gjsa::kSat ? sat : map; }
};

/// Overwrites scale k of the given modality with the condition's tokens.
/// Throws ShapeError when cond does not match the canvas layout.
void substitute_condition(Canvas& canvas, const hrq::TokenMap& cond, int modality, int k);

/// Per-position flags of which cells at every scale are regenerated: a cell is
/// kept from the input when a strict majority of its pixels are unmasked.
std::vector<std::vector<std::uint8_t>> downsample_mask(const std::vector<std::uint8_t>& mask, int side,
                                                       const hrq::ScaleSchedule& sched);

/// Default outpainting mask: everything outside the centred square of half
/// the side is regenerated.
std::vector<std::uint8_t> outpaint_mask(int side);

struct GenerateRequest {
  Mode mode = Mode::map2sat;
  geotile::GeoCoord geo;
  std::optional<RgbImage> sat;  // condition for sat2map, known image for inpaint/outpaint on satellite
  std::optional<RgbImage> map;
  /// inpaint/outpaint: which modality is completed. Pixels with mask != 0 are
  /// regenerated; side * side entries.
  int target = gjsa::kSat;
  std::vector<std::uint8_t> mask;
  KeyPointConfig keypoints;
  GuidanceSchedule guidance;
  SamplerConfig sampler;
  std::uint64_t item = 0;  // per-item stream: Rng::derive(sampler.seed, item)
};

struct ScaleTrace {
  int scale = 0;
  double complexity = 0.0;
  double strength = 0.0;
  int keypoints = 0;
  int substituted = 0;  // positions overwritten by the condition
  int clamped = 0;      // positions restored from the known image
};

struct GenerateResult {
  Canvas canvas;
  RgbImage sat;
  RgbImage map;
  std::vector<ScaleTrace> trace;
};

using ScaleObserver = std::function<void(const ScaleTrace&, const Canvas&)>;

/// Scale-by-scale joint sampling. Every mode runs the same loop; modes differ
/// only in which positions are substituted or clamped. Throws UsageError
/// when the mode's inputs are missing and ShapeError on mis-sized inputs.
template <class T>
GenerateResult generate(const gjsa::GjsaModel<T>& model, const hrq::Tokenizer& tok, const GenerateRequest& req,
                        const ScaleObserver& observer = {});

/// Record written next to each generated output.
nlohmann::json sidecar_json(const GenerateRequest& req, const GenerateResult& res,
                            const std::string& checkpoint_sha256);

}  // namespace emap::infer
