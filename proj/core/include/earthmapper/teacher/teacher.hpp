// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "earthmapper/common/image.hpp"

namespace emap::teacher {

/// h x w x c feature grid, interleaved.
struct FeatureMap {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> data;
  bool operator==(const FeatureMap&) const = default;
};

struct TeacherConfig {
  int hidden = 32;
  int d_sem = 64;
  int patch = 4;
};

/// Frozen feature extractor built from seeded random weights:
///   p x p conv (3 -> hidden), ReLU, p x p conv (hidden -> d_sem)
/// Each output channel is then standardized over spatial positions (zero
/// mean, unit population variance; channels with no variance become zero).
/// Weights are fixed at construction and there is no way to modify them.
class TeacherNet {
 public:
  explicit TeacherNet(std::uint64_t seed, TeacherConfig cfg = {});

  std::uint64_t seed() const { return seed_; }
  const TeacherConfig& config() const { return cfg_; }
  int d_sem() const { return cfg_.d_sem; }

  /// Square input with side divisible by patch^2; values of `img` in [0, 1].
  FeatureMap extract(const FloatImage& img) const;
  FeatureMap extract(const RgbImage& img) const;
  /// Unstandardized conv output.
  FeatureMap extract_raw(const FloatImage& img) const;

  /// Image-level descriptor: per-channel spatial mean and standard deviation
  /// of the raw features (2 * d_sem values). Standardized maps have zero mean
  /// by construction, so pooling uses the raw ones.
  std::vector<double> pooled(const FloatImage& img) const;
  std::vector<double> pooled(const RgbImage& img) const;

  /// SHA-256 over the weight bytes.
  std::string checksum() const;

 private:
  std::uint64_t seed_;
  TeacherConfig cfg_;
  std::vector<double> w1_, b1_, w2_, b2_;
};

/// Per-channel standardization over positions, in place.
void standardize(FeatureMap& f);

/// Bilinear resize of every channel to (h, w).
FeatureMap resize(const FeatureMap& f, int h, int w);

}  // namespace emap::teacher
