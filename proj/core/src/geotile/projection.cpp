// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/geotile/projection.hpp"

#include <cmath>
#include <string>

#include "earthmapper/common/error.hpp"

namespace emap::geotile {
namespace {

constexpr double kDeg = kPi / 180.0;
// Tolerates the last-ulp error of the band edge computed through atan(sinh(pi)).
constexpr double kBandSlack = 1e-9;

}  // namespace

double normalize_lon(double lon_deg) {
  if (!std::isfinite(lon_deg)) throw DomainError("longitude is not finite");
  if (lon_deg >= -180.0 && lon_deg < 180.0) return lon_deg;
  double r = std::fmod(lon_deg + 180.0, 360.0);
  if (r < 0) r += 360.0;
  r -= 180.0;
  return r >= 180.0 ? -180.0 : r;
}

GeoCoord make_geocoord(double lat_deg, double lon_deg) {
  if (!std::isfinite(lat_deg) || std::abs(lat_deg) > kMaxLatitude + kBandSlack) {
    throw DomainError("latitude " + std::to_string(lat_deg) + " outside the Web Mercator band");
  }
  return {lat_deg, normalize_lon(lon_deg)};
}

MercatorPoint lonlat_to_mercator(const GeoCoord& g) {
  if (!std::isfinite(g.lat_deg) || std::abs(g.lat_deg) > kMaxLatitude + kBandSlack) {
    throw DomainError("latitude " + std::to_string(g.lat_deg) + " outside the Web Mercator band");
  }
  if (!std::isfinite(g.lon_deg) || g.lon_deg < -180.0 || g.lon_deg > 180.0) {
    throw DomainError("longitude " + std::to_string(g.lon_deg) + " outside [-180, 180]");
  }
  const double phi = g.lat_deg * kDeg;
  // asinh(tan(phi)) equals ln(tan(pi/4 + phi/2)) and is exactly 0 at the equator.
  return {kEarthRadius * g.lon_deg * kDeg, kEarthRadius * std::asinh(std::tan(phi))};
}

GeoCoord mercator_to_lonlat(const MercatorPoint& p) {
  const double limit = kMercatorHalfWidth * (1.0 + 1e-12);
  if (!std::isfinite(p.x_m) || !std::isfinite(p.y_m) || std::abs(p.x_m) > limit || std::abs(p.y_m) > limit) {
    throw DomainError("mercator point (" + std::to_string(p.x_m) + ", " + std::to_string(p.y_m) +
                      ") outside the world square");
  }
  double lon = p.x_m / kEarthRadius / kDeg;
  lon = std::min(std::max(lon, -180.0), 180.0);
  // atan(sinh) is the well-conditioned form of 2*atan(exp(y/R)) - pi/2.
  const double lat = std::atan(std::sinh(p.y_m / kEarthRadius)) / kDeg;
  return {lat, lon};
}

void validate(const TileId& t) {
  if (t.zoom < 0 || t.zoom > 30) throw DomainError("tile zoom " + std::to_string(t.zoom) + " out of range");
  const std::int64_t n = std::int64_t{1} << t.zoom;
  if (t.x < 0 || t.x >= n || t.y < 0 || t.y >= n) {
    throw DomainError("tile (" + std::to_string(t.x) + ", " + std::to_string(t.y) + ") out of range for zoom " +
                      std::to_string(t.zoom));
  }
}

namespace {

// Same arithmetic for every edge, so neighbours agree on shared boundaries bit for bit.
double edge_x(std::int64_t i, std::int64_t n) {
  return (2.0 * static_cast<double>(i) / static_cast<double>(n) - 1.0) * kMercatorHalfWidth;
}
double edge_y(std::int64_t j, std::int64_t n) {
  return (1.0 - 2.0 * static_cast<double>(j) / static_cast<double>(n)) * kMercatorHalfWidth;
}

}  // namespace

std::pair<GeoCoord, GeoCoord> tile_bounds(const TileId& t) {
  validate(t);
  const std::int64_t n = std::int64_t{1} << t.zoom;
  const GeoCoord sw = mercator_to_lonlat({edge_x(t.x, n), edge_y(t.y + 1, n)});
  const GeoCoord ne = mercator_to_lonlat({edge_x(t.x + 1, n), edge_y(t.y, n)});
  return {sw, ne};
}

TileId tile_at(const GeoCoord& g, int zoom) {
  const MercatorPoint p = lonlat_to_mercator(g);
  const std::int64_t n = std::int64_t{1} << zoom;
  auto cell = [n](double u) {
    auto i = static_cast<std::int64_t>(std::floor(u * static_cast<double>(n)));
    return std::min(std::max<std::int64_t>(i, 0), n - 1);
  };
  return {zoom, cell((p.x_m / kMercatorHalfWidth + 1.0) / 2.0), cell((1.0 - p.y_m / kMercatorHalfWidth) / 2.0)};
}

}  // namespace emap::geotile
