// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace emap {

/// 8-bit interleaved RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool empty() const { return pixels.empty(); }
  bool operator==(const RgbImage&) const = default;
};

/// Interleaved real-valued image with values nominally in [0, 1].
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<double> data;

  FloatImage() = default;
  FloatImage(int w, int h, int c = 3)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0.0) {}

  double& at(int x, int y, int ch) { return data[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
  double at(int x, int y, int ch) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
};

FloatImage to_float(const RgbImage& img);
/// Rounds to nearest and clamps into [0, 255].
RgbImage to_rgb8(const FloatImage& img);

std::vector<std::uint8_t> encode_png(const RgbImage& img);
RgbImage decode_png(std::span<const std::uint8_t> bytes);
void write_png(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_png(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace emap
