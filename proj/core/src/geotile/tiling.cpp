// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/geotile/tiling.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "earthmapper/common/error.hpp"

namespace emap::geotile {

std::vector<ImageTile> partition_image(const RgbImage& img, int tile_px) {
  if (tile_px <= 0) throw ConfigError("tile size must be positive");
  std::vector<ImageTile> out;
  const int cols = img.width / tile_px;
  const int rows = img.height / tile_px;
  if (cols == 0 || rows == 0) {
    spdlog::warn("image {}x{} is smaller than one {}px tile", img.width, img.height, tile_px);
    return out;
  }
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int ty = 0; ty < rows; ++ty) {
    for (int tx = 0; tx < cols; ++tx) {
      ImageTile t{tx * tile_px, ty * tile_px, RgbImage(tile_px, tile_px)};
      for (int y = 0; y < tile_px; ++y) {
        std::memcpy(t.image.at(0, y), img.at(t.offset_x, t.offset_y + y), static_cast<std::size_t>(tile_px) * 3);
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

RgbImage reassemble(const std::vector<ImageTile>& tiles, int width, int height) {
  RgbImage canvas(width, height);
  for (const auto& t : tiles) {
    if (t.offset_x + t.image.width > width || t.offset_y + t.image.height > height) {
      throw ShapeError("tile at (" + std::to_string(t.offset_x) + ", " + std::to_string(t.offset_y) +
                       ") does not fit the canvas");
    }
    for (int y = 0; y < t.image.height; ++y) {
      std::memcpy(canvas.at(t.offset_x, t.offset_y + y), t.image.at(0, y), static_cast<std::size_t>(t.image.width) * 3);
    }
  }
  return canvas;
}

double color_diversity(const RgbImage& img) {
  if (img.pixels.empty()) return 0.0;
  // Integer sums are exact and order-free, which makes the result
  // independent of pixel order.
  std::uint64_t s1 = 0, s2 = 0;
  for (std::uint8_t v : img.pixels) {
    s1 += v;
    s2 += static_cast<std::uint64_t>(v) * v;
  }
  const double n = static_cast<double>(img.pixels.size());
  const double mean = static_cast<double>(s1) / n;
  const double var = static_cast<double>(s2) / n - mean * mean;
  return std::sqrt(std::max(var, 0.0));
}

TileFilter diversity_filter(double threshold) {
  return {"color_diversity", [threshold](const RgbImage& img) { return passes_diversity(color_diversity(img), threshold); }};
}

TileFilter cloud_heuristic_filter(double max_fraction, double v_min, double s_max) {
  return {"cloud_heuristic", [=](const RgbImage& img) {
            if (img.pixels.empty()) return false;
            std::size_t bright = 0;
            const std::size_t n = img.pixels.size() / 3;
            for (std::size_t i = 0; i < n; ++i) {
              const std::uint8_t* p = img.pixels.data() + 3 * i;
              const int mx = std::max({p[0], p[1], p[2]});
              const int mn = std::min({p[0], p[1], p[2]});
              const double v = mx / 255.0;
              const double s = mx == 0 ? 0.0 : static_cast<double>(mx - mn) / mx;
              if (v >= v_min && s <= s_max) ++bright;
            }
            return static_cast<double>(bright) <= max_fraction * static_cast<double>(n);
          }};
}

FilterVerdict apply_filters(const RgbImage& img, const std::vector<TileFilter>& filters) {
  for (const auto& f : filters) {
    if (!f.keep(img)) return {false, f.name};
  }
  return {};
}

}  // namespace emap::geotile
