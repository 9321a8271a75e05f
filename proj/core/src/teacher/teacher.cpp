// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/teacher/teacher.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/hash.hpp"
#include "earthmapper/common/resize.hpp"
#include "earthmapper/common/rng.hpp"

namespace emap::teacher {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

TeacherNet::TeacherNet(std::uint64_t seed, TeacherConfig cfg) : seed_(seed), cfg_(cfg) {
  if (cfg.hidden < 1 || cfg.d_sem < 1 || cfg.patch < 1) throw ConfigError("teacher sizes must be positive");
  Rng rng(seed);
  const int p2 = cfg.patch * cfg.patch;
  const int in1 = p2 * 3, in2 = p2 * cfg.hidden;
  w1_.resize(static_cast<std::size_t>(in1) * cfg.hidden);
  b1_.resize(cfg.hidden);
  w2_.resize(static_cast<std::size_t>(in2) * cfg.d_sem);
  b2_.resize(cfg.d_sem);
  for (auto& v : w1_) v = rng.normal() / std::sqrt(in1);
  // Spread the ReLU thresholds so units fire on different intensity levels.
  for (auto& v : b1_) v = rng.uniform(-0.3, 0.3);
  for (auto& v : w2_) v = rng.normal() / std::sqrt(in2);
  for (auto& v : b2_) v = rng.uniform(-0.1, 0.1);
}

namespace {

// [H, W, C] -> [(H/p)(W/p), p*p*C], same layout as the autograd op.
RowMat patchify(const double* x, int H, int W, int C, int p) {
  const int gh = H / p, gw = W / p;
  RowMat out(gh * gw, p * p * C);
  for (int by = 0; by < gh; ++by) {
    for (int bx = 0; bx < gw; ++bx) {
      double* row = out.data() + static_cast<std::ptrdiff_t>(by * gw + bx) * p * p * C;
      for (int dy = 0; dy < p; ++dy) {
        const double* src = x + (static_cast<std::size_t>(by * p + dy) * W + bx * p) * C;
        std::memcpy(row + dy * p * C, src, sizeof(double) * p * C);
      }
    }
  }
  return out;
}

}  // namespace

FeatureMap TeacherNet::extract_raw(const FloatImage& img) const {
  const int p = cfg_.patch, f = p * p;
  if (img.width != img.height || img.width % f != 0 || img.width == 0 || img.channels != 3) {
    throw ShapeError("teacher input must be a square RGB image with side divisible by " + std::to_string(f) +
                     ", got " + std::to_string(img.width) + "x" + std::to_string(img.height) + "x" +
                     std::to_string(img.channels));
  }
  std::vector<double> centered(img.data.size());
  for (std::size_t i = 0; i < centered.size(); ++i) centered[i] = img.data[i] - 0.5;

  const int p2 = p * p;
  Eigen::Map<const RowMat> W1(w1_.data(), p2 * 3, cfg_.hidden);
  Eigen::Map<const Eigen::RowVectorXd> B1(b1_.data(), cfg_.hidden);
  Eigen::Map<const RowMat> W2(w2_.data(), p2 * cfg_.hidden, cfg_.d_sem);
  Eigen::Map<const Eigen::RowVectorXd> B2(b2_.data(), cfg_.d_sem);

  RowMat h = patchify(centered.data(), img.height, img.width, 3, p) * W1;
  h.rowwise() += B1;
  h = h.cwiseMax(0.0);
  const int s1 = img.width / p;
  RowMat feats = patchify(h.data(), s1, s1, cfg_.hidden, p) * W2;
  feats.rowwise() += B2;

  FeatureMap out{s1 / p, s1 / p, cfg_.d_sem, {}};
  out.data.assign(feats.data(), feats.data() + feats.size());
  return out;
}

void standardize(FeatureMap& f) {
  const int n = f.h * f.w;
  for (int c = 0; c < f.c; ++c) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += f.data[static_cast<std::size_t>(i) * f.c + c];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t = f.data[static_cast<std::size_t>(i) * f.c + c] - mean;
      var += t * t;
    }
    var /= n;
    const double inv = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
    for (int i = 0; i < n; ++i) {
      double& v = f.data[static_cast<std::size_t>(i) * f.c + c];
      v = (v - mean) * inv;
    }
  }
}

FeatureMap TeacherNet::extract(const FloatImage& img) const {
  FeatureMap f = extract_raw(img);
  standardize(f);
  return f;
}

FeatureMap TeacherNet::extract(const RgbImage& img) const { return extract(to_float(img)); }

std::vector<double> TeacherNet::pooled(const FloatImage& img) const {
  const FeatureMap f = extract_raw(img);
  const int n = f.h * f.w;
  std::vector<double> out(static_cast<std::size_t>(2 * f.c), 0.0);
  for (int c = 0; c < f.c; ++c) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += f.data[static_cast<std::size_t>(i) * f.c + c];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += std::pow(f.data[static_cast<std::size_t>(i) * f.c + c] - mean, 2);
    out[c] = mean;
    out[f.c + c] = std::sqrt(var / n);
  }
  return out;
}

std::vector<double> TeacherNet::pooled(const RgbImage& img) const { return pooled(to_float(img)); }

std::string TeacherNet::checksum() const {
  std::vector<std::uint8_t> bytes;
  for (const auto* v : {&w1_, &b1_, &w2_, &b2_}) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(v->data());
    bytes.insert(bytes.end(), p, p + v->size() * sizeof(double));
  }
  return sha256_hex(bytes);
}

FeatureMap resize(const FeatureMap& f, int h, int w) {
  return {h, w, f.c, resize_bilinear(f.data, f.h, f.w, f.c, h, w)};
}

}  // namespace emap::teacher
