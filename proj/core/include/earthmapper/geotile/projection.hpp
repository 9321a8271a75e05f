// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>

namespace emap::geotile {

inline constexpr double kEarthRadius = 6378137.0;
inline constexpr double kPi = 3.14159265358979323846;
/// pi * R: half-width of the Web Mercator square in meters.
inline constexpr double kMercatorHalfWidth = kPi * kEarthRadius;
/// atan(sinh(pi)) in degrees; latitude where the Mercator square ends.
inline constexpr double kMaxLatitude = 85.051128779806592;

struct GeoCoord {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  bool operator==(const GeoCoord&) const = default;
};

struct MercatorPoint {
  double x_m = 0.0;
  double y_m = 0.0;
  bool operator==(const MercatorPoint&) const = default;
};

struct TileId {
  int zoom = 0;
  std::int64_t x = 0;
  std::int64_t y = 0;
  bool operator==(const TileId&) const = default;
  auto operator<=>(const TileId&) const = default;
};

/// Wraps longitude into [-180, 180).
double normalize_lon(double lon_deg);

/// Validates latitude against the Mercator band and wraps longitude.
/// Throws DomainError for latitudes outside the band or non-finite input.
GeoCoord make_geocoord(double lat_deg, double lon_deg);

/// Accepts lon in [-180, 180]; the closed east edge is allowed so that the
/// east boundary of the last tile column can round-trip.
MercatorPoint lonlat_to_mercator(const GeoCoord& g);

/// Exact inverse. x = +pi*R maps to lon = +180 (the antimeridian seen from the
/// west), every other point lands in [-180, 180).
GeoCoord mercator_to_lonlat(const MercatorPoint& p);

void validate(const TileId& t);

/// South-west and north-east corners; tile y = 0 is the northern row.
std::pair<GeoCoord, GeoCoord> tile_bounds(const TileId& t);

/// Tile containing the coordinate at the given zoom.
TileId tile_at(const GeoCoord& g, int zoom);

}  // namespace emap::geotile
