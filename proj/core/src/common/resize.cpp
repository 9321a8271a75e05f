// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/common/resize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "earthmapper/common/error.hpp"

namespace emap {

namespace {

struct AxisTaps {
  std::vector<int> first;
  std::vector<int> count;
  std::vector<double> weights;  // count[i] entries starting at offset[i]
  std::vector<int> offset;
};

AxisTaps compute_taps(int src, int dst) {
  AxisTaps taps;
  const double scale = static_cast<double>(src) / dst;
  const double support = std::max(scale, 1.0);
  const double inv = 1.0 / support;
  for (int o = 0; o < dst; ++o) {
    const double center = (o + 0.5) * scale;
    const int lo = std::max(0, static_cast<int>(std::floor(center - support)));
    const int hi = std::min(src, static_cast<int>(std::ceil(center + support)));
    taps.first.push_back(lo);
    taps.offset.push_back(static_cast<int>(taps.weights.size()));
    double total = 0.0;
    std::vector<double> w;
    for (int i = lo; i < hi; ++i) {
      const double d = std::abs((i + 0.5 - center) * inv);
      const double v = d < 1.0 ? 1.0 - d : 0.0;
      w.push_back(v);
      total += v;
    }
    for (double& v : w) v /= total;
    taps.count.push_back(static_cast<int>(w.size()));
    taps.weights.insert(taps.weights.end(), w.begin(), w.end());
  }
  return taps;
}

}  // namespace

std::vector<double> resize_bilinear(std::span<const double> src, int src_h, int src_w, int channels, int dst_h,
                                    int dst_w) {
  if (src_h <= 0 || src_w <= 0 || dst_h <= 0 || dst_w <= 0 || channels <= 0) {
    throw ShapeError("resize_bilinear: non-positive extent");
  }
  if (src.size() != static_cast<std::size_t>(src_h) * src_w * channels) {
    throw ShapeError("resize_bilinear: buffer holds " + std::to_string(src.size()) + " values, expected " +
                     std::to_string(static_cast<std::size_t>(src_h) * src_w * channels));
  }
  if (src_h == dst_h && src_w == dst_w) return {src.begin(), src.end()};

  const AxisTaps tx = compute_taps(src_w, dst_w);
  const AxisTaps ty = compute_taps(src_h, dst_h);

  std::vector<double> tmp(static_cast<std::size_t>(src_h) * dst_w * channels, 0.0);
  for (int y = 0; y < src_h; ++y) {
    for (int x = 0; x < dst_w; ++x) {
      double* out = &tmp[(static_cast<std::size_t>(y) * dst_w + x) * channels];
      for (int t = 0; t < tx.count[x]; ++t) {
        const double w = tx.weights[tx.offset[x] + t];
        const double* in = &src[(static_cast<std::size_t>(y) * src_w + tx.first[x] + t) * channels];
        for (int c = 0; c < channels; ++c) out[c] += w * in[c];
      }
    }
  }
  std::vector<double> dst(static_cast<std::size_t>(dst_h) * dst_w * channels, 0.0);
  for (int y = 0; y < dst_h; ++y) {
    double* row = &dst[static_cast<std::size_t>(y) * dst_w * channels];
    for (int t = 0; t < ty.count[y]; ++t) {
      const double w = ty.weights[ty.offset[y] + t];
      const double* in = &tmp[static_cast<std::size_t>(ty.first[y] + t) * dst_w * channels];
      for (int i = 0; i < dst_w * channels; ++i) row[i] += w * in[i];
    }
  }
  return dst;
}

}  // namespace emap
