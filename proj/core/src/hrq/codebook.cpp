// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/hrq/codebook.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/rng.hpp"

namespace emap::hrq {

Codebook::Codebook(int k, int dim)
    : K(k), d(dim), vectors(static_cast<std::size_t>(k) * dim, 0.0), usage_counts(static_cast<std::size_t>(k), 0) {
  if (k < 2) throw ConfigError("codebook needs at least 2 entries, got " + std::to_string(k));
  if (dim < 1) throw ConfigError("codebook dimension must be positive");
}

Codebook::Codebook(int k, int dim, std::vector<double> values) : Codebook(k, dim) {
  if (values.size() != vectors.size()) {
    throw ShapeError("codebook values have " + std::to_string(values.size()) + " elements, expected " +
                     std::to_string(vectors.size()));
  }
  vectors = std::move(values);
}

namespace {

inline double sq_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

}  // namespace

int nearest(const Codebook& cb, std::span<const double> r) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const double* base = cb.vectors.data();
  for (int k = 0; k < cb.K; ++k) {
    const double dist = sq_dist(r.data(), base + static_cast<std::size_t>(k) * cb.d, cb.d);
    if (dist < best_d) {
      best_d = dist;
      best = k;
    }
  }
  return best;
}

Quantized quantize_vector(std::span<const double> z, const Codebook& cb, int depth) {
  if (depth < 1) throw ConfigError("quantization depth must be at least 1");
  if (static_cast<int>(z.size()) != cb.d) {
    throw ShapeError("vector of size " + std::to_string(z.size()) + " against codebook dimension " + std::to_string(cb.d));
  }
  Quantized q;
  q.residual.assign(z.begin(), z.end());
  q.indices.reserve(depth);
  for (int j = 0; j < depth; ++j) {
    const int k = nearest(cb, q.residual);
    q.indices.push_back(k);
    const auto c = cb.row(k);
    for (int i = 0; i < cb.d; ++i) q.residual[i] -= c[i];
  }
  return q;
}

std::vector<double> dequantize_vector(std::span<const int> indices, const Codebook& cb) {
  std::vector<double> out(static_cast<std::size_t>(cb.d), 0.0);
  for (int k : indices) {
    if (k < 0 || k >= cb.K) {
      throw IndexError("code index " + std::to_string(k) + " outside [0, " + std::to_string(cb.K) + ")");
    }
    const auto c = cb.row(k);
    for (int i = 0; i < cb.d; ++i) out[i] += c[i];
  }
  return out;
}

void record_usage(Codebook& cb, std::span<const int> indices) {
  cb.usage_counts.resize(static_cast<std::size_t>(cb.K), 0);
  for (int k : indices) {
    if (k < 0 || k >= cb.K) throw IndexError("code index " + std::to_string(k) + " out of range");
    ++cb.usage_counts[k];
  }
}

CodebookFit learn_codebook(std::span<const double> samples, int d, int K, int iters, std::uint64_t seed) {
  if (d < 1 || samples.size() % static_cast<std::size_t>(d) != 0) {
    throw ShapeError("sample buffer of " + std::to_string(samples.size()) + " values is not a multiple of d=" +
                     std::to_string(d));
  }
  const std::size_t n = samples.size() / d;
  if (n < static_cast<std::size_t>(K)) {
    throw ConfigError("codebook learning needs at least K=" + std::to_string(K) + " samples, got " + std::to_string(n));
  }
  Codebook cb(K, d);
  Rng rng(seed);
  auto point = [&](std::size_t i) { return samples.data() + i * d; };

  // k-means++ seeding.
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  std::copy_n(point(first), d, cb.row(0).data());
  for (int k = 1; k < K; ++k) {
    const double* prev = cb.row(k - 1).data();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq_dist(point(i), prev, d));
      total += best[i];
    }
    if (total <= 0.0) {
      // Fewer distinct points than entries: keep a copy and flag it.
      std::copy_n(cb.row(0).data(), d, cb.row(k).data());
      cb.duplicates.push_back(k);
      continue;
    }
    const std::size_t pick = rng.categorical(best);
    std::copy_n(point(pick), d, cb.row(k).data());
  }

  CodebookFit fit;
  std::vector<int> assign(n, 0);
  std::vector<double> dist(n, 0.0);
  auto assign_all = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = nearest(cb, {point(i), static_cast<std::size_t>(d)});
      dist[i] = sq_dist(point(i), cb.row(assign[i]).data(), d);
      total += dist[i];
    }
    return total / static_cast<double>(n * d);
  };
  fit.mse_trace.push_back(assign_all());

  std::vector<double> sums(static_cast<std::size_t>(K) * d);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(K));
  for (int it = 0; it < iters; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      double* s = sums.data() + static_cast<std::size_t>(assign[i]) * d;
      const double* p = point(i);
      for (int j = 0; j < d; ++j) s[j] += p[j];
    }
    std::vector<char> taken(n, 0);
    for (int k = 0; k < K; ++k) {
      if (counts[k] > 0) {
        for (int j = 0; j < d; ++j) cb.row(k)[j] = sums[static_cast<std::size_t>(k) * d + j] / static_cast<double>(counts[k]);
        continue;
      }
      // Dead entry: move it onto the worst-served sample not already claimed.
      std::size_t worst = n;
      double worst_d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > worst_d) {
          worst_d = dist[i];
          worst = i;
        }
      }
      if (worst == n) continue;  // every sample already sits on an entry
      taken[worst] = 1;
      dist[worst] = 0.0;
      std::copy_n(point(worst), d, cb.row(k).data());
    }
    fit.mse_trace.push_back(assign_all());
  }

  // Duplicates flagged during seeding may have been revived by reseeding.
  std::vector<int> still;
  for (int k : cb.duplicates) {
    for (int j = 0; j < K; ++j) {
      if (j != k && sq_dist(cb.row(j).data(), cb.row(k).data(), d) <= 1e-16) {
        still.push_back(k);
        break;
      }
    }
  }
  cb.duplicates = std::move(still);
  if (!cb.duplicates.empty()) {
    spdlog::warn("codebook has {} duplicate entries: the samples contain fewer than K distinct points",
                 cb.duplicates.size());
  }
  record_usage(cb, assign);
  fit.codebook = std::move(cb);
  return fit;
}

}  // namespace emap::hrq
