// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "earthmapper/geotile/projection.hpp"

namespace emap::geotile {

enum class Split { train, val, test };

const char* to_string(Split s);
Split parse_split(const std::string& s);

struct TileRecord {
  TileId tile;
  GeoCoord bounds_sw;
  GeoCoord bounds_ne;
  std::filesystem::path sat_image_path;  // relative paths resolve against the manifest directory
  std::filesystem::path map_image_path;
  std::string city_tag;
  Split split = Split::train;

  GeoCoord center() const;
  bool operator==(const TileRecord&) const = default;
};

inline constexpr int kManifestSchemaVersion = 1;

struct Manifest {
  std::vector<TileRecord> records;
  int schema_version = kManifestSchemaVersion;

  std::size_t count(Split s) const;
  std::vector<TileRecord> split(Split s) const;
  bool operator==(const Manifest&) const = default;
};

/// Sorts by (zoom, x, y) and checks id uniqueness and corner ordering.
void canonicalize(Manifest& m);

/// One JSON object per line, preceded by a {"schema_version": N} header line.
void write_manifest(Manifest m, const std::filesystem::path& path);

/// Throws VersionError on a schema mismatch, IntegrityError on malformed lines
/// and, when check_files is set, on records whose image files are absent (all
/// offenders listed).
Manifest read_manifest(const std::filesystem::path& path, bool check_files = true);

/// Decodes every referenced image and checks it is 256x256; returns offenders.
std::vector<std::string> verify_images(const Manifest& m, const std::filesystem::path& base_dir);

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::filesystem::path& p);

/// Deterministic train/val/test assignment: records are ranked by a seeded
/// hash of their tile id and cut at the requested fractions (largest
/// remainder rounding, so counts sum to the record count exactly).
void assign_splits(Manifest& m, double train, double val, double test, std::uint64_t seed);

}  // namespace emap::geotile
