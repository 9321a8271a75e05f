// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "earthmapper/geotile/manifest.hpp"
#include "earthmapper/gjsa/train.hpp"
#include "earthmapper/infer/generate.hpp"
#include "earthmapper/metrics/report.hpp"

namespace emap::metrics {

struct EvalConfig {
  geotile::Split split = geotile::Split::test;
  std::optional<infer::GuidanceSchedule> guidance;  // direction default when unset
  infer::KeyPointConfig keypoints;
  infer::SamplerConfig sampler;
  std::size_t limit = 0;  // first n records of the split; 0 = all
};

/// One ground-truth pair of the split, resized to the tokenizer's side.
struct EvalPair {
  RgbImage sat;
  RgbImage map;
  geotile::GeoCoord geo;
};

/// Loads a split. Images of another size are resized bilinearly.
std::vector<EvalPair> load_split(const geotile::Manifest& m, const std::filesystem::path& base_dir,
                                 geotile::Split split, int side, std::size_t limit = 0);

RgbImage resize_image(const RgbImage& img, int side);

/// Generates every pair of the split in the given direction (item i uses
/// stream i) and scores it against the ground truth: map2sat with the
/// distribution metrics, sat2map with the pixel metrics. Throws UsageError for
/// an empty split or a direction other than map2sat/sat2map.
template <class T>
MetricReport evaluate(const std::vector<EvalPair>& pairs, const gjsa::Checkpoint<T>& ckpt, infer::Mode direction,
                      const EvalConfig& cfg = {});

template <class T>
MetricReport evaluate(const geotile::Manifest& m, const std::filesystem::path& base_dir,
                      const gjsa::Checkpoint<T>& ckpt, infer::Mode direction, const EvalConfig& cfg = {});

}  // namespace emap::metrics
