// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earthmapper/num/tensor.hpp"

namespace emap::gjsa {

inline constexpr std::uint32_t kArchiveVersion = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i64 = 2 };

struct Blob {
  std::string name;
  DType dtype = DType::f32;
  num::Shape shape;
  std::vector<std::uint8_t> bytes;  // little-endian values
};

/// Little-endian container:
///   "EMAP" | u32 version | u64 n | n bytes of canonical JSON metadata
///   | u32 blob count | per blob: u32 name length, name, u8 dtype, u32 rank,
///     i64 dims..., u64 byte length, bytes
///   | 32-byte SHA-256 of everything before it
class Archive {
 public:
  nlohmann::json meta = nlohmann::json::object();

  void put(const std::string& name, const num::Tensor<float>& t);
  void put(const std::string& name, const num::Tensor<double>& t);
  void put_i64(const std::string& name, const std::vector<std::int64_t>& values);

  bool contains(const std::string& name) const;
  const Blob& blob(const std::string& name) const;
  /// Reads a floating blob as T (f32 and f64 convert); IntegrityError if
  /// missing or not floating point.
  template <class T>
  num::Tensor<T> get(const std::string& name) const;
  std::vector<std::int64_t> get_i64(const std::string& name) const;
  const std::vector<Blob>& blobs() const { return blobs_; }

  std::vector<std::uint8_t> serialize() const;
  /// IntegrityError on bad magic, truncation or checksum mismatch;
  /// VersionError on an unknown version.
  static Archive parse(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  std::vector<Blob> blobs_;
  Blob& slot(const std::string& name);
};

}  // namespace emap::gjsa
