// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>

#include "earthmapper/common/image.hpp"

namespace emap::metrics {

double rmse(const FloatImage& a, const FloatImage& b);

/// 10 log10(1 / MSE) with peak 1. Identical images give +infinity.
double psnr(const FloatImage& a, const FloatImage& b);

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double L = 1.0;
};

/// Gaussian-window SSIM averaged over all fully contained window positions,
/// then over channels. Images smaller than the window use the largest odd
/// window that fits (same sigma).
double ssim(const FloatImage& a, const FloatImage& b, const SsimConfig& cfg = {});

/// Window taps for the given size, normalized to sum to one.
std::vector<double> gaussian_taps(int size, double sigma);

}  // namespace emap::metrics
