// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <map>
#include <mutex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "earthmapper/common/error.hpp"
#include "earthmapper/common/parallel.hpp"
#include "earthmapper/geotile/fetch.hpp"
#include "earthmapper/geotile/manifest.hpp"
#include "earthmapper/geotile/tiling.hpp"
#include "earthmapper/synthdata/synth.hpp"

namespace emap::cli {
namespace {

void add_split_flags(CLI::App* c, SplitFlags& s) {
  c->add_option("--train", s.train, "Train fraction (default 0.8)");
  c->add_option("--val", s.val, "Validation fraction (default 0.1)");
  c->add_option("--test", s.test, "Test fraction (default 0.1)");
  c->add_option("--seed", s.seed, "Split / generator seed (default 0)");
}

struct SplitPlan {
  double train, val, test;
  std::uint64_t seed;
};

SplitPlan resolve_split(Resolver& r, const SplitFlags& s) {
  SplitPlan p{r("train", s.train, 0.8), r("val", s.val, 0.1), r("test", s.test, 0.1), r("seed", s.seed, std::uint64_t{0})};
  if (p.train < 0 || p.val < 0 || p.test < 0 || p.train + p.val + p.test <= 0) {
    throw ConfigError("split fractions must be non-negative with a positive sum");
  }
  return p;
}

std::string tile_name(const geotile::TileId& t) { return fmt::format("{}_{}_{}.png", t.zoom, t.x, t.y); }

// Shared tail of tile and fetch: filters one pair, writes it, returns the record.
class PairSink {
 public:
  PairSink(std::filesystem::path out, std::string city, bool cloud, double min_div)
      : out_(std::move(out)), city_(std::move(city)), div_(geotile::diversity_filter(min_div)) {
    if (cloud) sat_filters_.push_back(geotile::cloud_heuristic_filter());
    std::filesystem::create_directories(out_ / "sat");
    std::filesystem::create_directories(out_ / "map");
  }

  void offer(const geotile::TileId& t, const RgbImage& sat, const RgbImage& map) {
    const auto vs = geotile::apply_filters(sat, sat_filters_);
    // Low structural diversity is judged on the map tile.
    const auto vm = geotile::apply_filters(map, {div_});
    if (!vs.keep || !vm.keep) {
      std::lock_guard lk(mu_);
      ++rejected_[vs.keep ? "map:" + vm.rejected_by : "sat:" + vs.rejected_by];
      return;
    }
    const auto name = tile_name(t);
    write_png(out_ / "sat" / name, sat);
    write_png(out_ / "map" / name, map);
    geotile::TileRecord r;
    r.tile = t;
    std::tie(r.bounds_sw, r.bounds_ne) = geotile::tile_bounds(t);
    r.sat_image_path = std::filesystem::path("sat") / name;
    r.map_image_path = std::filesystem::path("map") / name;
    r.city_tag = city_;
    std::lock_guard lk(mu_);
    manifest_.records.push_back(std::move(r));
  }

  std::filesystem::path finish(const SplitPlan& p, Context& ctx) {
    geotile::assign_splits(manifest_, p.train, p.val, p.test, p.seed);
    const auto path = out_ / "manifest.ndjson";
    geotile::write_manifest(manifest_, path);
    nlohmann::json rej = nlohmann::json::object();
    for (const auto& [k, v] : rejected_) rej[k] = v;
    ctx.record->note("kept", manifest_.records.size());
    ctx.record->note("rejected", rej);
    ctx.record->add_output(path);
    spdlog::info("kept {} pairs, rejected {}", manifest_.records.size(), rej.dump());
    return path;
  }

  std::size_t kept() const { return manifest_.records.size(); }

 private:
  std::filesystem::path out_;
  std::string city_;
  geotile::TileFilter div_;
  std::vector<geotile::TileFilter> sat_filters_;
  geotile::Manifest manifest_;
  std::map<std::string, int> rejected_;
  std::mutex mu_;
};

}  // namespace

CLI::App* add_tile(CLI::App& app, TileOptions& o) {
  auto* c = app.add_subcommand("tile", "Cut an aligned satellite/map image pair into tiles and write a manifest");
  c->add_option("--sat", o.sat, "Large satellite image (PNG)");
  c->add_option("--map", o.map, "Large map image of the same extent (PNG)");
  c->add_option("--zoom", o.zoom, "Zoom level of the tiles");
  c->add_option("--x0", o.x0, "Tile column of the top-left tile (default 0)");
  c->add_option("--y0", o.y0, "Tile row of the top-left tile (default 0)");
  c->add_option("--tile-px", o.tile_px, "Tile side in pixels (default 256)");
  c->add_option("--city", o.city, "City tag stored with every record");
  c->add_option("--out", o.out, "Output corpus directory (default <workspace>/corpus)");
  c->add_option("--min-diversity", o.min_diversity, "Keep map tiles with colour stddev >= this (default 10)");
  c->add_option("--cloud-filter", o.cloud_filter, "Drop cloudy-looking satellite tiles (default true)");
  add_split_flags(c, o.split);
  return c;
}

void run_tile(const TileOptions& o, Context& ctx) {
  Resolver r(ctx, "tile");
  const auto sat_path = r.optional_path("sat", o.sat);
  const auto map_path = r.optional_path("map", o.map);
  const auto zoom = r.optional("zoom", o.zoom);
  if (!sat_path || !map_path) throw UsageError("tile needs --sat and --map");
  if (!zoom) throw UsageError("tile needs --zoom");
  const auto x0 = r("x0", o.x0, std::int64_t{0});
  const auto y0 = r("y0", o.y0, std::int64_t{0});
  const int px = r("tile_px", o.tile_px, 256);
  const auto city = r("city", o.city, std::string("unknown"));
  const auto out = r.path("out", o.out, ctx.ws.corpus());
  const double min_div = r("min_diversity", o.min_diversity, geotile::kMinColorDiversity);
  const bool cloud = r("cloud_filter", o.cloud_filter, true);
  const auto split = resolve_split(r, o.split);
  ctx.record->set_seed("split", split.seed);

  ctx.record->add_input(*sat_path);
  ctx.record->add_input(*map_path);
  const RgbImage sat = read_png(*sat_path), map = read_png(*map_path);
  if (sat.width != map.width || sat.height != map.height) {
    throw UsageError(fmt::format("satellite {}x{} and map {}x{} differ in size", sat.width, sat.height, map.width,
                                 map.height));
  }
  const auto sat_tiles = geotile::partition_image(sat, px);
  const auto map_tiles = geotile::partition_image(map, px);
  PairSink sink(out, city, cloud, min_div);
  for (std::size_t i = 0; i < sat_tiles.size(); ++i) {
    geotile::TileId t{*zoom, x0 + sat_tiles[i].offset_x / px, y0 + sat_tiles[i].offset_y / px};
    geotile::validate(t);
    sink.offer(t, sat_tiles[i].image, map_tiles[i].image);
  }
  sink.finish(split, ctx);
}

CLI::App* add_fetch(CLI::App& app, FetchOptions& o) {
  auto* c = app.add_subcommand("fetch", "Download paired tiles covering a bounding box from two tile servers");
  c->add_option("--endpoint-sat", o.endpoint_sat, "Satellite URL template with {z} {x} {y}");
  c->add_option("--endpoint-map", o.endpoint_map, "Map URL template with {z} {x} {y}");
  c->add_option("--lat-min", o.lat_min, "Southern edge of the bounding box (degrees)");
  c->add_option("--lat-max", o.lat_max, "Northern edge (degrees)");
  c->add_option("--lon-min", o.lon_min, "Western edge (degrees)");
  c->add_option("--lon-max", o.lon_max, "Eastern edge (degrees)");
  c->add_option("--zoom", o.zoom, "Zoom level (default 18)");
  c->add_option("--cache", o.cache, "Tile cache directory (default <workspace>/cache)");
  c->add_option("--max-in-flight", o.max_in_flight, "Concurrent request budget (default 8)");
  c->add_option("--attempts", o.attempts, "Attempts per tile (default 3)");
  c->add_option("--city", o.city, "City tag stored with every record");
  c->add_option("--out", o.out, "Output corpus directory (default <workspace>/corpus)");
  c->add_option("--min-diversity", o.min_diversity, "Keep map tiles with colour stddev >= this (default 10)");
  c->add_option("--cloud-filter", o.cloud_filter, "Drop cloudy-looking satellite tiles (default true)");
  add_split_flags(c, o.split);
  return c;
}

void run_fetch(const FetchOptions& o, Context& ctx) {
  Resolver r(ctx, "tile");
  const auto ep_sat = r.optional("endpoint_sat", o.endpoint_sat);
  const auto ep_map = r.optional("endpoint_map", o.endpoint_map);
  if (!ep_sat || !ep_map) throw UsageError("fetch needs --endpoint-sat and --endpoint-map");
  geotile::EndpointTemplate::parse(*ep_sat);
  geotile::EndpointTemplate::parse(*ep_map);
  const auto lat0 = r.optional("lat_min", o.lat_min), lat1 = r.optional("lat_max", o.lat_max);
  const auto lon0 = r.optional("lon_min", o.lon_min), lon1 = r.optional("lon_max", o.lon_max);
  if (!lat0 || !lat1 || !lon0 || !lon1) throw UsageError("fetch needs --lat-min --lat-max --lon-min --lon-max");
  if (*lat0 > *lat1 || *lon0 > *lon1) throw UsageError("bounding box minimum exceeds maximum");
  const int zoom = r("zoom", o.zoom, 18);
  geotile::FetchConfig fc;
  fc.cache_dir = r.path("cache", o.cache, ctx.ws.root / "cache");
  fc.max_in_flight = r("max_in_flight", o.max_in_flight, 8);
  fc.max_attempts = r("attempts", o.attempts, 3);
  if (fc.max_in_flight < 1 || fc.max_attempts < 1) throw ConfigError("max_in_flight and attempts must be >= 1");
  const auto city = r("city", o.city, std::string("unknown"));
  const auto out = r.path("out", o.out, ctx.ws.corpus());
  const double min_div = r("min_diversity", o.min_diversity, geotile::kMinColorDiversity);
  const bool cloud = r("cloud_filter", o.cloud_filter, true);
  const auto split = resolve_split(r, o.split);
  ctx.record->set_seed("split", split.seed);

  const auto sw = geotile::tile_at(geotile::make_geocoord(*lat0, *lon0), zoom);
  const auto ne = geotile::tile_at(geotile::make_geocoord(*lat1, *lon1), zoom);
  std::vector<geotile::TileId> tiles;
  const std::int64_t nx = ne.x - sw.x + 1, ny = sw.y - ne.y + 1;
  if (nx <= 0 || ny <= 0) throw UsageError("bounding box crosses the antimeridian; split it in two");
  if (nx * ny > 200000) throw UsageError(fmt::format("bounding box covers {} tiles; the limit is 200000", nx * ny));
  for (std::int64_t y = ne.y; y <= sw.y; ++y)
    for (std::int64_t x = sw.x; x <= ne.x; ++x) tiles.push_back({zoom, x, y});
  spdlog::info("fetching {} tile pairs at zoom {}", tiles.size(), zoom);

  geotile::TileFetcher fetcher(fc);
  PairSink sink(out, city, cloud, min_div);
  std::mutex mu;
  nlohmann::json failures = nlohmann::json::array();
  parallel_for(
      tiles.size(),
      [&](std::size_t i) {
        const auto& t = tiles[i];
        try {
          const auto sat = decode_png(fetcher.fetch(*ep_sat, t));
          const auto map = decode_png(fetcher.fetch(*ep_map, t));
          sink.offer(t, sat, map);
        } catch (const Error& e) {
          std::lock_guard lk(mu);
          failures.push_back({{"tile", fmt::format("{}/{}/{}", t.zoom, t.x, t.y)}, {"error", e.what()}});
        }
      },
      static_cast<unsigned>(fc.max_in_flight));
  ctx.record->note("failed", failures);
  ctx.record->note("network_requests", fetcher.network_requests());
  ctx.record->note("cache_hits", fetcher.cache_hits());
  if (!failures.empty()) spdlog::warn("{} tiles failed; see the run record", failures.size());
  sink.finish(split, ctx);
  if (sink.kept() == 0 && !failures.empty()) throw IoError("no tile pair could be fetched");
}

CLI::App* add_synth(CLI::App& app, SynthOptions& o) {
  auto* c = app.add_subcommand("synth", "Generate a procedural paired corpus");
  c->add_option("--n", o.n, "Number of pairs (default 64)");
  c->add_option("--size", o.size, "Image side in pixels (default 256)");
  c->add_option("--snap", o.snap, "Road and block grid spacing in pixels (default 16)");
  c->add_option("--max-roads", o.max_roads, "Upper bound on roads per axis (default 7)");
  c->add_option("--noise-cell", o.noise_cell, "Coarsest satellite noise lattice spacing (default 32)");
  c->add_option("--city", o.city, "City tag (default synthetic)");
  c->add_option("--out", o.out, "Output corpus directory (default <workspace>/corpus)");
  add_split_flags(c, o.split);
  return c;
}

void run_synth(const SynthOptions& o, Context& ctx) {
  Resolver r(ctx, "tile");
  synthdata::CorpusConfig cc;
  cc.n = r("n", o.n, 64);
  cc.scene.size = r("size", o.size, cc.scene.size);
  cc.scene.snap = r("snap", o.snap, cc.scene.snap);
  cc.scene.max_roads = r("max_roads", o.max_roads, cc.scene.max_roads);
  cc.scene.noise_base_cell = r("noise_cell", o.noise_cell, cc.scene.noise_base_cell);
  cc.city_tag = r("city", o.city, cc.city_tag);
  const auto out = r.path("out", o.out, ctx.ws.corpus());
  const auto split = resolve_split(r, o.split);
  cc.seed = split.seed;
  cc.train = split.train;
  cc.val = split.val;
  cc.test = split.test;
  if (cc.n < 1) throw ConfigError("n must be >= 1");
  ctx.record->set_seed("corpus", cc.seed);

  const auto m = synthdata::build_corpus(cc, out);
  const auto path = out / "manifest.ndjson";
  ctx.record->add_output(path);
  ctx.record->note("pairs", m.records.size());
  ctx.record->note("train", m.count(geotile::Split::train));
  ctx.record->note("val", m.count(geotile::Split::val));
  ctx.record->note("test", m.count(geotile::Split::test));
  spdlog::info("wrote {} pairs to {}", m.records.size(), out.string());
}

}  // namespace emap::cli
