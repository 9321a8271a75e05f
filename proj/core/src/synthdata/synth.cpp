// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/synthdata/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/parallel.hpp"
#include "earthmapper/common/rng.hpp"
#include "earthmapper/geotile/tiling.hpp"

namespace emap::synthdata {

using geotile::GeoCoord;

double urban_factor(const GeoCoord& g, const GeoBox& box) {
  const double u = (g.lat_deg - box.lat_min) / (box.lat_max - box.lat_min);
  const double v = (g.lon_deg - box.lon_min) / (box.lon_max - box.lon_min);
  const double w = 0.5 + 0.45 * std::sin(2.0 * geotile::kPi * (u + 0.1)) * std::cos(2.0 * geotile::kPi * (v - 0.2));
  return std::clamp(w, 0.0, 1.0);
}

namespace {

constexpr auto kGreen = static_cast<std::uint8_t>(TerrainClass::green);
constexpr auto kRoad = static_cast<std::uint8_t>(TerrainClass::road);
constexpr auto kBuilding = static_cast<std::uint8_t>(TerrainClass::building);
constexpr auto kWater = static_cast<std::uint8_t>(TerrainClass::water);

// Smoothstep-interpolated lattice noise in roughly [-1, 1].
class ValueNoise {
 public:
  ValueNoise(std::uint64_t seed, int size, int base_cell, int octaves) : size_(size) {
    Rng rng(seed);
    for (int o = 0, cell = base_cell; o < octaves && cell >= 2; ++o, cell /= 2) {
      Octave oct{cell, size / cell + 2, {}};
      oct.lattice.resize(static_cast<std::size_t>(oct.n) * oct.n);
      for (auto& v : oct.lattice) v = rng.uniform(-1.0, 1.0);
      octaves_.push_back(std::move(oct));
    }
  }

  double at(int x, int y) const {
    double total = 0.0, amp = 1.0, norm = 0.0;
    for (const auto& o : octaves_) {
      const double fx = static_cast<double>(x) / o.cell, fy = static_cast<double>(y) / o.cell;
      const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
      const double tx = smooth(fx - ix), ty = smooth(fy - iy);
      auto L = [&](int i, int j) { return o.lattice[static_cast<std::size_t>(j) * o.n + i]; };
      const double top = L(ix, iy) * (1 - tx) + L(ix + 1, iy) * tx;
      const double bot = L(ix, iy + 1) * (1 - tx) + L(ix + 1, iy + 1) * tx;
      total += amp * (top * (1 - ty) + bot * ty);
      norm += amp;
      amp *= 0.5;
    }
    return norm > 0 ? total / norm : 0.0;
  }

 private:
  struct Octave {
    int cell;
    int n;
    std::vector<double> lattice;
  };
  static double smooth(double t) { return t * t * (3 - 2 * t); }
  int size_;
  std::vector<Octave> octaves_;
};

struct Layout {
  std::vector<std::uint8_t> labels;
  std::vector<int> building_id;  // -1 outside buildings
  int buildings = 0;
};

Layout draw_layout(const SceneSpec& spec, Rng& rng, double urban) {
  const int S = spec.size, cell = spec.snap, n = S / cell;
  std::vector<std::uint8_t> grid(static_cast<std::size_t>(n) * n, kGreen);
  auto G = [&](int cx, int cy) -> std::uint8_t& { return grid[static_cast<std::size_t>(cy) * n + cx]; };

  // Water: a meandering river or a lake, more likely in rural areas.
  if (rng.uniform() < 0.65 * (1.0 - urban) + 0.1) {
    if (rng.uniform() < 0.6) {
      const bool vertical = rng.uniform() < 0.5;
      int center = static_cast<int>(rng.below(n));
      const int width = 1 + static_cast<int>(rng.below(3));
      for (int t = 0; t < n; ++t) {
        for (int k = 0; k < width; ++k) {
          const int c = std::clamp(center + k - width / 2, 0, n - 1);
          (vertical ? G(c, t) : G(t, c)) = kWater;
        }
        center = std::clamp(center + static_cast<int>(rng.below(3)) - 1, 0, n - 1);
      }
    } else {
      const double cx = rng.uniform(0, n), cy = rng.uniform(0, n);
      const double rx = rng.uniform(1.5, n / 3.0), ry = rng.uniform(1.5, n / 3.0);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
          if (dx * dx + dy * dy <= 1.0) G(x, y) = kWater;
        }
      }
    }
  }

  // Roads on grid rows and columns; urban scenes get more of them.
  auto pick_lines = [&](int count) {
    std::set<int> lines;
    while (static_cast<int>(lines.size()) < count) lines.insert(1 + static_cast<int>(rng.below(n - 2)));
    return lines;
  };
  auto road_count = [&] {
    const double expected = 1.0 + urban * (spec.max_roads - 1) * rng.uniform(0.4, 1.0);
    return std::clamp(static_cast<int>(std::lround(expected)), 1, std::max(1, n / 3));
  };
  for (int r : pick_lines(road_count())) {
    // Some roads stop partway, which makes T junctions.
    const int from = rng.uniform() < 0.3 ? static_cast<int>(rng.below(n / 2)) : 0;
    for (int x = from; x < n; ++x) G(x, r) = kRoad;
  }
  for (int c : pick_lines(road_count())) {
    const int to = rng.uniform() < 0.3 ? n / 2 + static_cast<int>(rng.below(n / 2)) : n;
    for (int y = 0; y < to; ++y) G(c, y) = kRoad;
  }

  Layout out;
  out.labels.resize(static_cast<std::size_t>(S) * S);
  out.building_id.assign(static_cast<std::size_t>(S) * S, -1);
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) out.labels[static_cast<std::size_t>(y) * S + x] = G(x / cell, y / cell);
  }

  // Buildings: inset rectangles in green cells, denser near roads and in cities.
  const int inset_max = std::max(1, cell / 4);
  auto near_road = [&](int cx, int cy) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = cx + dx, y = cy + dy;
        if (x >= 0 && y >= 0 && x < n && y < n && G(x, y) == kRoad) return true;
      }
    }
    return false;
  };
  auto place = [&](int cx, int cy) {
    const int x0 = cx * cell + 1 + static_cast<int>(rng.below(inset_max));
    const int y0 = cy * cell + 1 + static_cast<int>(rng.below(inset_max));
    const int x1 = (cx + 1) * cell - 1 - static_cast<int>(rng.below(inset_max));
    const int y1 = (cy + 1) * cell - 1 - static_cast<int>(rng.below(inset_max));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        out.labels[static_cast<std::size_t>(y) * S + x] = kBuilding;
        out.building_id[static_cast<std::size_t>(y) * S + x] = out.buildings;
      }
    }
    ++out.buildings;
  };
  for (int cy = 0; cy < n; ++cy) {
    for (int cx = 0; cx < n; ++cx) {
      if (G(cx, cy) != kGreen) continue;
      const double p = near_road(cx, cy) ? 0.25 + 0.7 * urban : 0.05 + 0.3 * urban;
      if (rng.uniform() < p) place(cx, cy);
    }
  }
  if (out.buildings == 0) {
    for (int i = 0; i < n * n; ++i) {
      if (grid[i] == kGreen) {
        place(i % n, i / n);
        break;
      }
    }
  }
  return out;
}

// The coordinate always comes from the spec seed; redraws only change the layout.
ScenePair render(const SceneSpec& spec, std::uint64_t attempt) {
  const int S = spec.size;
  Rng rng(spec.seed);
  ScenePair out;
  out.geo = {rng.uniform(spec.box.lat_min, spec.box.lat_max), rng.uniform(spec.box.lon_min, spec.box.lon_max)};
  const std::uint64_t seed = attempt == 0 ? spec.seed : Rng::derive(spec.seed, attempt);
  if (attempt > 0) rng = Rng(seed);
  const Layout lay = draw_layout(spec, rng, urban_factor(out.geo, spec.box));
  out.labels = lay.labels;

  std::vector<ValueNoise> lum, hue;
  for (int c = 0; c < kClassCount; ++c) {
    lum.emplace_back(Rng::derive(seed, 100 + c), S, spec.noise_base_cell, spec.noise_octaves);
    hue.emplace_back(Rng::derive(seed, 200 + c), S, spec.noise_base_cell * 2, 1);
  }
  std::vector<std::array<int, 3>> roof(static_cast<std::size_t>(lay.buildings));
  for (auto& r : roof) {
    for (auto& v : r) v = static_cast<int>(rng.below(41)) - 20;
  }

  out.map = RgbImage(S, S);
  out.sat = RgbImage(S, S);
  out.sat_family.resize(out.labels.size());
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * S + x;
      const std::uint8_t cls = out.labels[i];
      std::copy(spec.map_palette[cls].begin(), spec.map_palette[cls].end(), out.map.at(x, y));

      const double l = spec.sat_noise[cls] * lum[cls].at(x, y);
      const double h = 0.35 * spec.sat_noise[cls] * hue[cls].at(x, y);
      const int b = lay.building_id[i];
      std::uint8_t* p = out.sat.at(x, y);
      for (int ch = 0; ch < 3; ++ch) {
        double v = spec.sat_base[cls][ch] + l + (ch == 1 ? h : -0.5 * h);
        if (b >= 0) v += roof[b][ch];
        p[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
      out.sat_family[i] = cls;
    }
  }
  return out;
}

}  // namespace

ScenePair generate_pair(const SceneSpec& spec) {
  if (spec.size <= 0 || spec.snap <= 0 || spec.size % spec.snap != 0 || spec.size / spec.snap < 4) {
    throw ConfigError("scene size must be a multiple of the snap grid with at least 4 cells per side");
  }
  // Redraw the rare scene that would fail the color-diversity filter.
  for (std::uint64_t attempt = 0;; ++attempt) {
    ScenePair p = render(spec, attempt);
    if (geotile::passes_diversity(geotile::color_diversity(p.sat)) &&
        geotile::passes_diversity(geotile::color_diversity(p.map))) {
      return p;
    }
  }
}

std::vector<std::uint8_t> map_labels(const RgbImage& map, const SceneSpec& spec) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(map.width) * map.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint8_t* p = map.pixels.data() + 3 * i;
    int found = -1;
    for (int c = 0; c < kClassCount && found < 0; ++c) {
      if (std::equal(p, p + 3, spec.map_palette[c].begin())) found = c;
    }
    if (found < 0) throw DomainError("map pixel " + std::to_string(i) + " is not a palette color");
    out[i] = static_cast<std::uint8_t>(found);
  }
  return out;
}

geotile::Manifest build_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.n < 0) throw ConfigError("corpus size must be non-negative");
  // Draw coordinates first so tile collisions can be resolved sequentially.
  std::vector<std::uint64_t> seeds;
  std::set<geotile::TileId> used;
  std::uint64_t counter = 0;
  while (static_cast<int>(seeds.size()) < cfg.n) {
    SceneSpec probe = cfg.scene;
    probe.seed = Rng::derive(cfg.seed, counter++);
    Rng rng(probe.seed);
    const GeoCoord g{rng.uniform(probe.box.lat_min, probe.box.lat_max), rng.uniform(probe.box.lon_min, probe.box.lon_max)};
    if (used.insert(geotile::tile_at(g, 19)).second) seeds.push_back(probe.seed);
  }

  std::vector<geotile::TileRecord> records(seeds.size());
  std::filesystem::create_directories(out_dir / "sat");
  std::filesystem::create_directories(out_dir / "map");
  parallel_for(seeds.size(), [&](std::size_t i) {
    SceneSpec spec = cfg.scene;
    spec.seed = seeds[i];
    const ScenePair pair = generate_pair(spec);
    auto& r = records[i];
    r.tile = geotile::tile_at(pair.geo, 19);
    std::tie(r.bounds_sw, r.bounds_ne) = geotile::tile_bounds(r.tile);
    const std::string stem = std::to_string(r.tile.zoom) + "_" + std::to_string(r.tile.x) + "_" + std::to_string(r.tile.y);
    r.sat_image_path = std::filesystem::path("sat") / (stem + ".png");
    r.map_image_path = std::filesystem::path("map") / (stem + ".png");
    r.city_tag = cfg.city_tag;
    try {
      write_png(out_dir / r.sat_image_path, pair.sat);
      write_png(out_dir / r.map_image_path, pair.map);
    } catch (const std::exception& e) {
      throw IoError("writing corpus tile " + stem + ": " + e.what());
    }
  });

  geotile::Manifest m;
  m.records = std::move(records);
  geotile::assign_splits(m, cfg.train, cfg.val, cfg.test, cfg.seed);
  geotile::write_manifest(m, out_dir / "manifest.ndjson");
  geotile::canonicalize(m);
  return m;
}

}  // namespace emap::synthdata
