// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "earthmapper/common/image.hpp"
#include "earthmapper/geotile/manifest.hpp"
#include "earthmapper/geotile/projection.hpp"

namespace emap::synthdata {

enum class TerrainClass : std::uint8_t { green = 0, road = 1, building = 2, water = 3 };
inline constexpr int kClassCount = 4;

using Rgb = std::array<std::uint8_t, 3>;

struct GeoBox {
  double lat_min = 30.8;
  double lat_max = 31.6;
  double lon_min = 121.0;
  double lon_max = 122.0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int size = 256;
  int snap = 16;           // road and block edges fall on this grid
  int max_roads = 7;       // upper bound on road lines per axis
  int noise_octaves = 3;
  int noise_base_cell = 32;  // lattice spacing of the coarsest noise octave
  std::array<Rgb, kClassCount> map_palette{{{197, 232, 197}, {255, 255, 255}, {217, 208, 201}, {170, 211, 223}}};
  std::array<Rgb, kClassCount> sat_base{{{66, 104, 54}, {118, 118, 112}, {168, 152, 140}, {38, 66, 98}}};
  std::array<double, kClassCount> sat_noise{{22.0, 8.0, 14.0, 8.0}};
  GeoBox box;
};

struct ScenePair {
  RgbImage sat;
  RgbImage map;
  geotile::GeoCoord geo;
  std::vector<std::uint8_t> labels;      // layout classes, size*size, row-major
  std::vector<std::uint8_t> sat_family;  // texture family used for each satellite pixel
};

/// Urban density in [0, 1] as a smooth function of position inside the box;
/// it drives how many roads and buildings a scene gets.
double urban_factor(const geotile::GeoCoord& g, const GeoBox& box);

/// Deterministic in spec. The map is a flat palette rendering of the class
/// raster; the satellite image textures the same raster per class.
ScenePair generate_pair(const SceneSpec& spec);

/// Class raster recovered from a map rendering by exact palette lookup.
/// Throws DomainError on an off-palette pixel.
std::vector<std::uint8_t> map_labels(const RgbImage& map, const SceneSpec& spec);

struct CorpusConfig {
  int n = 64;
  std::uint64_t seed = 0;
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  SceneSpec scene;  // its seed is replaced per item
  std::string city_tag = "synthetic";
};

/// Writes sat/ and map/ PNGs plus manifest.ndjson under out_dir. Items whose
/// zoom-19 tile collides with an earlier one are redrawn.
geotile::Manifest build_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace emap::synthdata
