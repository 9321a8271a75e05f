// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace emap::hrq {

/// K prototype vectors of dimension d, row-major.
struct Codebook {
  int K = 0;
  int d = 0;
  std::vector<double> vectors;
  std::vector<std::int64_t> usage_counts;
  /// Entries that had to be filled with a copy of another entry because the
  /// training samples had too few distinct points.
  std::vector<int> duplicates;

  Codebook() = default;
  Codebook(int k, int dim);
  Codebook(int k, int dim, std::vector<double> values);

  std::span<const double> row(int k) const { return {vectors.data() + static_cast<std::size_t>(k) * d, static_cast<std::size_t>(d)}; }
  std::span<double> row(int k) { return {vectors.data() + static_cast<std::size_t>(k) * d, static_cast<std::size_t>(d)}; }
  bool operator==(const Codebook&) const = default;
};

/// Index of the entry with the smallest squared distance to r; the first
/// (lowest) index wins ties. Distances are summed in component order.
int nearest(const Codebook& cb, std::span<const double> r);

struct Quantized {
  std::vector<int> indices;       // D entries
  std::vector<double> residual;   // r_D
};

/// Greedy residual recursion: r_0 = z, k_j = nearest(r_{j-1}), r_j = r_{j-1} - c_{k_j}.
Quantized quantize_vector(std::span<const double> z, const Codebook& cb, int depth);

/// Sum of the selected entries, accumulated in index order. Throws IndexError
/// for out-of-range indices.
std::vector<double> dequantize_vector(std::span<const int> indices, const Codebook& cb);

struct CodebookFit {
  Codebook codebook;
  /// Mean squared quantization error after seeding (entry 0) and after each iteration.
  std::vector<double> mse_trace;
};

/// k-means with k-means++ seeding over n = samples.size()/d points.
/// Clusters that lose all members are reseeded to the sample farthest from
/// its centroid. Deterministic for a given seed.
CodebookFit learn_codebook(std::span<const double> samples, int d, int K, int iters, std::uint64_t seed);

/// Counts how often each entry appears in the given index list.
void record_usage(Codebook& cb, std::span<const int> indices);

}  // namespace emap::hrq
