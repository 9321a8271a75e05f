// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "earthmapper/common/image.hpp"
#include "earthmapper/teacher/teacher.hpp"

namespace emap::metrics {

/// One descriptor per row.
using FeatureSet = std::vector<std::vector<double>>;

/// Teacher pooled descriptors of each image.
FeatureSet pooled_features(const std::vector<FloatImage>& images, const teacher::TeacherNet& teacher);

/// |mu_A - mu_B|^2 + tr(S_A + S_B - 2 (S_A S_B)^(1/2)) with sample covariances
/// and a ridge on both diagonals.
double feature_frechet(const FeatureSet& a, const FeatureSet& b, double ridge = 1e-6);

/// Cubic polynomial kernel (x.y / d + 1)^3.
double poly_kernel(const std::vector<double>& x, const std::vector<double>& y);

/// Unbiased MMD^2 estimate over the full sets.
double mmd2_unbiased(const FeatureSet& a, const FeatureSet& b);

struct KidConfig {
  int subsets = 10;
  int subset_size = 100;
  std::uint64_t seed = 0;
};

/// Mean unbiased MMD^2 over random equal-size subsets drawn without
/// replacement. Throws ConfigError when subset_size exceeds either set.
double kernel_mmd(const FeatureSet& a, const FeatureSet& b, const KidConfig& cfg = {});

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

/// A point is covered by a set when it lies within the k-th nearest neighbour
/// radius (closed ball) of some member. Precision is the covered fraction of
/// `gen` under `real`, recall the reverse.
PrecisionRecall knn_precision_recall(const FeatureSet& real, const FeatureSet& gen, int k = 3);

/// Mean squared difference of standardized teacher feature maps.
double perceptual_distance(const FloatImage& a, const FloatImage& b, const teacher::TeacherNet& teacher);

}  // namespace emap::metrics
