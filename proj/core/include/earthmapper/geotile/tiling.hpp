// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "earthmapper/common/image.hpp"

namespace emap::geotile {

struct ImageTile {
  int offset_x = 0;
  int offset_y = 0;
  RgbImage image;
};

/// Non-overlapping tile_px squares in row-major order. Trailing rows/columns
/// that do not fill a whole tile are dropped; an image smaller than one tile
/// yields an empty list (and a logged warning).
std::vector<ImageTile> partition_image(const RgbImage& img, int tile_px = 256);

/// Pastes tiles back onto a canvas of the given size.
RgbImage reassemble(const std::vector<ImageTile>& tiles, int width, int height);

/// Population standard deviation of all channel values pooled together.
double color_diversity(const RgbImage& img);

inline constexpr double kMinColorDiversity = 10.0;

/// Keeps a tile when its diversity reaches the threshold (inclusive).
inline bool passes_diversity(double diversity, double threshold = kMinColorDiversity) {
  return diversity >= threshold;
}

/// A named keep/drop rule applied to decoded tiles.
struct TileFilter {
  std::string name;
  std::function<bool(const RgbImage&)> keep;
};

TileFilter diversity_filter(double threshold = kMinColorDiversity);

/// Rough stand-in for manual cloud screening: drops tiles where more than
/// max_fraction of pixels are bright and unsaturated (HSV value >= v_min and
/// saturation <= s_max). It cannot tell snow, concrete or glare from cloud.
TileFilter cloud_heuristic_filter(double max_fraction = 0.5, double v_min = 0.85, double s_max = 0.12);

struct FilterVerdict {
  bool keep = true;
  std::string rejected_by;  // first failing filter, empty when kept
};

FilterVerdict apply_filters(const RgbImage& img, const std::vector<TileFilter>& filters);

}  // namespace emap::geotile
