// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "earthmapper/hrq/codebook.hpp"

namespace emap::hrq {

struct ScaleSchedule {
  std::vector<std::pair<int, int>> scales;  // (h_k, w_k)

  /// Non-empty, non-decreasing sides, strictly increasing area.
  void validate() const;
  int count() const { return static_cast<int>(scales.size()); }
  int height(int k) const { return scales[k].first; }
  int width(int k) const { return scales[k].second; }
  int area(int k) const { return scales[k].first * scales[k].second; }
  /// Sum of h_k * w_k.
  int total_positions() const;
  /// Offset of scale k's first position in the flattened scale order.
  int offset(int k) const;
  bool operator==(const ScaleSchedule&) const = default;

  /// 1x1, 2x2, 4x4, 8x8, 16x16.
  static ScaleSchedule standard();
};

/// h x w x d, interleaved.
struct LatentGrid {
  int h = 0;
  int w = 0;
  int d = 0;
  std::vector<double> data;

  LatentGrid() = default;
  LatentGrid(int height, int width, int dim)
      : h(height), w(width), d(dim), data(static_cast<std::size_t>(height) * width * dim, 0.0) {}
  bool operator==(const LatentGrid&) const = default;
};

/// Per-scale grids of depth-D index tuples. scales[k] holds h_k*w_k*D
/// indices laid out position-major: scales[k][pos * depth + j].
struct TokenMap {
  int depth = 0;
  std::vector<std::vector<int>> scales;

  int at(int k, int pos, int j) const { return scales[k][static_cast<std::size_t>(pos) * depth + j]; }
  bool operator==(const TokenMap&) const = default;
};

/// Checks the token map against the schedule and codebook size; throws
/// ShapeError or IndexError.
void validate(const TokenMap& tm, const ScaleSchedule& sched, int K);

/// Bilinear resize of a grid to (h, w).
LatentGrid resize(const LatentGrid& g, int h, int w);

/// Dequantized scale-k grid at its own resolution.
LatentGrid dequantize_scale(const TokenMap& tm, const Codebook& cb, const ScaleSchedule& sched, int k);

/// f_k = down_k(latent) - sum_{m<k} up_k(dequant(f_m)); each f_k is quantized
/// per position with the residual recursion.
TokenMap encode_multiscale(const LatentGrid& latent, const Codebook& cb, const ScaleSchedule& sched, int depth);

/// sum over k of up_final(dequant(scale k)).
LatentGrid decode_multiscale(const TokenMap& tm, const Codebook& cb, const ScaleSchedule& sched);

/// Same sum restricted to scales 0..last (inclusive).
LatentGrid decode_partial(const TokenMap& tm, const Codebook& cb, const ScaleSchedule& sched, int last);

/// sum_{m<k} up_k(dequant(scale m)) at scale k's resolution: what the
/// generator sees before predicting scale k.
LatentGrid accumulated_input(const TokenMap& tm, const Codebook& cb, const ScaleSchedule& sched, int k);

/// All intermediate f_k residual vectors produced while encoding, pooled;
/// used to fit the codebook to what it will actually quantize.
std::vector<double> multiscale_residuals(const LatentGrid& latent, const Codebook& cb, const ScaleSchedule& sched,
                                         int depth);

}  // namespace emap::hrq
