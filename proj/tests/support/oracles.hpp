// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deliberately plain reference implementations used to cross-check the
// library. They share no code with it.

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace emap::testing {

struct OracleQuant {
  std::vector<int> idx;
  std::vector<double> rest;
};

/// Greedy residual quantization written as a direct transcription of the
/// recursion; codebook is K rows of length d.
inline OracleQuant oracle_residual_quantize(const std::vector<double>& z, const std::vector<std::vector<double>>& book,
                                            int depth) {
  OracleQuant out;
  out.rest = z;
  for (int level = 1; level <= depth; ++level) {
    int pick = -1;
    double pick_cost = 0.0;
    for (std::size_t c = 0; c < book.size(); ++c) {
      double cost = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) cost += (out.rest[j] - book[c][j]) * (out.rest[j] - book[c][j]);
      if (pick < 0 || cost < pick_cost) {
        pick = static_cast<int>(c);
        pick_cost = cost;
      }
    }
    out.idx.push_back(pick);
    for (std::size_t j = 0; j < z.size(); ++j) out.rest[j] = out.rest[j] - book[pick][j];
  }
  return out;
}

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(size);
  double total = 0.0;
  const int half = size / 2;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-((i - half) * (i - half)) / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

/// Planar image: img[channel][row][col].
using Planes = std::vector<std::vector<std::vector<double>>>;

inline double oracle_mse(const Planes& a, const Planes& b) {
  double acc = 0.0;
  double n = 0.0;
  for (std::size_t y = 0; y < a[0].size(); ++y) {
    for (std::size_t x = 0; x < a[0][0].size(); ++x) {
      for (std::size_t c = 0; c < a.size(); ++c) {
        acc += (a[c][y][x] - b[c][y][x]) * (a[c][y][x] - b[c][y][x]);
        n += 1.0;
      }
    }
  }
  return acc / n;
}

/// Textbook SSIM: explicit 2D window, every statistic in its own pass.
inline double oracle_ssim(const Planes& a, const Planes& b, int win, double sigma) {
  const auto g = gaussian_window(win, sigma);
  std::vector<std::vector<double>> w(win, std::vector<double>(win));
  for (int r = 0; r < win; ++r) {
    for (int c = 0; c < win; ++c) w[r][c] = g[r] * g[c];
  }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int rows = static_cast<int>(a[0].size()), cols = static_cast<int>(a[0][0].size());
  double per_channel = 0.0;
  for (std::size_t ch = 0; ch < a.size(); ++ch) {
    const auto& A = a[ch];
    const auto& B = b[ch];
    double acc = 0.0;
    int count = 0;
    for (int top = 0; top + win <= rows; ++top) {
      for (int left = 0; left + win <= cols; ++left) {
        double mu_a = 0, mu_b = 0, e_aa = 0, e_bb = 0, e_ab = 0;
        for (int r = 0; r < win; ++r)
          for (int c = 0; c < win; ++c) mu_a += w[r][c] * A[top + r][left + c];
        for (int r = 0; r < win; ++r)
          for (int c = 0; c < win; ++c) mu_b += w[r][c] * B[top + r][left + c];
        for (int r = 0; r < win; ++r)
          for (int c = 0; c < win; ++c) e_aa += w[r][c] * (A[top + r][left + c] * A[top + r][left + c]);
        for (int r = 0; r < win; ++r)
          for (int c = 0; c < win; ++c) e_bb += w[r][c] * (B[top + r][left + c] * B[top + r][left + c]);
        for (int r = 0; r < win; ++r)
          for (int c = 0; c < win; ++c) e_ab += w[r][c] * (A[top + r][left + c] * B[top + r][left + c]);
        const double var_a = e_aa - mu_a * mu_a;
        const double var_b = e_bb - mu_b * mu_b;
        const double cov = e_ab - mu_a * mu_b;
        acc += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++count;
      }
    }
    per_channel += acc / count;
  }
  return per_channel / static_cast<double>(a.size());
}

/// Unbiased MMD^2 with the cubic polynomial kernel, summing each unordered
/// pair once and doubling.
inline double oracle_mmd2(const std::vector<std::vector<double>>& X, const std::vector<std::vector<double>>& Y) {
  auto k = [](const std::vector<double>& p, const std::vector<double>& q) {
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * q[i];
    return std::pow(dot / static_cast<double>(p.size()) + 1.0, 3);
  };
  const double m = static_cast<double>(X.size()), n = static_cast<double>(Y.size());
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = i + 1; j < X.size(); ++j) xx += 2.0 * k(X[i], X[j]);
  for (std::size_t i = 0; i < Y.size(); ++i)
    for (std::size_t j = i + 1; j < Y.size(); ++j) yy += 2.0 * k(Y[i], Y[j]);
  for (const auto& x : X)
    for (const auto& y : Y) xy += k(x, y);
  return xx / (m * (m - 1)) + yy / (n * (n - 1)) - 2.0 * xy / (m * n);
}

}  // namespace emap::testing
