// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/geotile/manifest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/image.hpp"
#include "earthmapper/common/rng.hpp"

namespace emap::geotile {

using nlohmann::json;

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

GeoCoord TileRecord::center() const {
  const MercatorPoint a = lonlat_to_mercator(bounds_sw);
  const MercatorPoint b = lonlat_to_mercator(bounds_ne);
  return mercator_to_lonlat({(a.x_m + b.x_m) / 2.0, (a.y_m + b.y_m) / 2.0});
}

std::size_t Manifest::count(Split s) const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [s](const auto& r) { return r.split == s; }));
}

std::vector<TileRecord> Manifest::split(Split s) const {
  std::vector<TileRecord> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(r);
  }
  return out;
}

void canonicalize(Manifest& m) {
  std::sort(m.records.begin(), m.records.end(), [](const auto& a, const auto& b) { return a.tile < b.tile; });
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    validate(r.tile);
    if (i > 0 && m.records[i - 1].tile == r.tile) {
      throw IntegrityError("duplicate tile id " + std::to_string(r.tile.zoom) + "/" + std::to_string(r.tile.x) + "/" +
                           std::to_string(r.tile.y));
    }
    if (!(r.bounds_sw.lat_deg < r.bounds_ne.lat_deg && r.bounds_sw.lon_deg < r.bounds_ne.lon_deg)) {
      throw IntegrityError("record bounds are not south-west to north-east");
    }
  }
}

namespace {

json to_json(const TileRecord& r) {
  // Field order is fixed by nlohmann's sorted object keys.
  return json{{"tile", {{"zoom", r.tile.zoom}, {"x", r.tile.x}, {"y", r.tile.y}}},
              {"bounds_sw", {{"lat_deg", r.bounds_sw.lat_deg}, {"lon_deg", r.bounds_sw.lon_deg}}},
              {"bounds_ne", {{"lat_deg", r.bounds_ne.lat_deg}, {"lon_deg", r.bounds_ne.lon_deg}}},
              {"sat_image_path", r.sat_image_path.generic_string()},
              {"map_image_path", r.map_image_path.generic_string()},
              {"city_tag", r.city_tag},
              {"split", to_string(r.split)}};
}

TileRecord from_json(const json& j) {
  TileRecord r;
  r.tile = {j.at("tile").at("zoom").get<int>(), j.at("tile").at("x").get<std::int64_t>(),
            j.at("tile").at("y").get<std::int64_t>()};
  r.bounds_sw = {j.at("bounds_sw").at("lat_deg").get<double>(), j.at("bounds_sw").at("lon_deg").get<double>()};
  r.bounds_ne = {j.at("bounds_ne").at("lat_deg").get<double>(), j.at("bounds_ne").at("lon_deg").get<double>()};
  r.sat_image_path = j.at("sat_image_path").get<std::string>();
  r.map_image_path = j.at("map_image_path").get<std::string>();
  r.city_tag = j.at("city_tag").get<std::string>();
  r.split = parse_split(j.at("split").get<std::string>());
  return r;
}

}  // namespace

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::filesystem::path& p) {
  return p.is_absolute() ? p : base_dir / p;
}

void write_manifest(Manifest m, const std::filesystem::path& path) {
  canonicalize(m);
  std::ostringstream os;
  os << json{{"schema_version", m.schema_version}}.dump() << '\n';
  for (const auto& r : m.records) os << to_json(r).dump() << '\n';
  const std::string text = os.str();
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Manifest read_manifest(const std::filesystem::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw IntegrityError("cannot open manifest " + path.string(), {path.string()});
  std::string line;
  if (!std::getline(in, line)) throw IntegrityError("manifest " + path.string() + " is empty", {path.string()});
  Manifest m;
  try {
    m.schema_version = json::parse(line).at("schema_version").get<int>();
  } catch (const json::exception& e) {
    throw IntegrityError("manifest header is malformed: " + std::string(e.what()), {path.string()});
  }
  if (m.schema_version != kManifestSchemaVersion) {
    throw VersionError("manifest schema version " + std::to_string(m.schema_version) + ", expected " +
                           std::to_string(kManifestSchemaVersion),
                       static_cast<unsigned>(m.schema_version), kManifestSchemaVersion);
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      m.records.push_back(from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IntegrityError("manifest line " + std::to_string(lineno) + ": " + e.what(), {path.string()});
    }
  }
  if (check_files) {
    const auto base = path.parent_path();
    std::vector<std::string> missing;
    for (const auto& r : m.records) {
      for (const auto* p : {&r.sat_image_path, &r.map_image_path}) {
        const auto full = resolve(base, *p);
        if (!std::filesystem::exists(full)) missing.push_back(full.string());
      }
    }
    if (!missing.empty()) {
      std::string msg = "manifest references missing image files:";
      for (const auto& p : missing) msg += " " + p;
      throw IntegrityError(msg, missing);
    }
  }
  return m;
}

std::vector<std::string> verify_images(const Manifest& m, const std::filesystem::path& base_dir) {
  std::vector<std::string> bad;
  for (const auto& r : m.records) {
    for (const auto* p : {&r.sat_image_path, &r.map_image_path}) {
      const auto full = resolve(base_dir, *p);
      try {
        const RgbImage img = read_png(full);
        if (img.width != 256 || img.height != 256) bad.push_back(full.string());
      } catch (const Error&) {
        bad.push_back(full.string());
      }
    }
  }
  return bad;
}

void assign_splits(Manifest& m, double train, double val, double test, std::uint64_t seed) {
  if (train < 0 || val < 0 || test < 0 || std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  const std::size_t n = m.records.size();
  const std::array<double, 3> frac{train, val, test};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = frac[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto key = [&](std::size_t i) {
    const auto& t = m.records[i].tile;
    std::uint64_t h = Rng::derive(seed, static_cast<std::uint64_t>(t.zoom));
    h = Rng::derive(h, static_cast<std::uint64_t>(t.x));
    return Rng::derive(h, static_cast<std::uint64_t>(t.y));
  };
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = key(a), kb = key(b);
    return ka != kb ? ka < kb : m.records[a].tile < m.records[b].tile;
  });
  std::size_t pos = 0;
  for (int s = 0; s < 3; ++s) {
    for (std::size_t c = 0; c < counts[s]; ++c) m.records[idx[pos++]].split = static_cast<Split>(s);
  }
}

}  // namespace emap::geotile
