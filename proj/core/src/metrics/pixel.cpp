// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/metrics/pixel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "earthmapper/common/error.hpp"

namespace emap::metrics {
namespace {

void check_same(const FloatImage& a, const FloatImage& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ShapeError("image shapes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + "x" +
                     std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                     "x" + std::to_string(b.channels));
  }
  if (a.data.empty()) throw ShapeError("images are empty");
}

double mse(const FloatImage& a, const FloatImage& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

}  // namespace

double rmse(const FloatImage& a, const FloatImage& b) {
  check_same(a, b);
  return std::sqrt(mse(a, b));
}

double psnr(const FloatImage& a, const FloatImage& b) {
  check_same(a, b);
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const int half = size / 2;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-static_cast<double>((i - half) * (i - half)) / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

double ssim(const FloatImage& a, const FloatImage& b, const SsimConfig& cfg) {
  check_same(a, b);
  int win = std::min({cfg.window, a.width, a.height});
  if (win % 2 == 0) --win;
  const auto taps = gaussian_taps(win, cfg.sigma);
  const double c1 = (cfg.k1 * cfg.L) * (cfg.k1 * cfg.L);
  const double c2 = (cfg.k2 * cfg.L) * (cfg.k2 * cfg.L);
  const int ny = a.height - win + 1, nx = a.width - win + 1;

  double channel_total = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) {
    double pos_total = 0.0;
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int j = 0; j < win; ++j) {
          for (int i = 0; i < win; ++i) {
            const double w = taps[j] * taps[i];
            const double va = a.at(x + i, y + j, ch), vb = b.at(x + i, y + j, ch);
            // w * (a * b) rather than (w * a) * b keeps ssim(a, b) == ssim(b, a) exactly.
            ma += w * va;
            mb += w * vb;
            saa += w * (va * va);
            sbb += w * (vb * vb);
            sab += w * (va * vb);
          }
        }
        const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        pos_total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      }
    }
    channel_total += pos_total / (static_cast<double>(nx) * ny);
  }
  return channel_total / a.channels;
}

}  // namespace emap::metrics
