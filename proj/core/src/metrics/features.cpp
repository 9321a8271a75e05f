// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/metrics/features.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/parallel.hpp"
#include "earthmapper/common/rng.hpp"

namespace emap::metrics {
namespace {

int check_set(const FeatureSet& s, int min_size, const char* what) {
  if (static_cast<int>(s.size()) < min_size) {
    throw UsageError(std::string(what) + ": need at least " + std::to_string(min_size) + " samples, got " +
                     std::to_string(s.size()));
  }
  const auto d = s.front().size();
  for (const auto& row : s) {
    if (row.size() != d) throw ShapeError(std::string(what) + ": descriptors of differing length");
  }
  return static_cast<int>(d);
}

Eigen::MatrixXd as_matrix(const FeatureSet& s) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(s.front().size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s[i].size(); ++j) m(i, j) = s[i][j];
  }
  return m;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Squared distance from each point to its k-th nearest other point.
std::vector<double> knn_radii(const FeatureSet& s, int k) {
  std::vector<double> radii(s.size());
  parallel_for(s.size(), [&](std::size_t i) {
    std::vector<double> d;
    d.reserve(s.size() - 1);
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j != i) d.push_back(sq_dist(s[i], s[j]));
    }
    std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
    radii[i] = d[k - 1];
  });
  return radii;
}

double coverage(const FeatureSet& balls, const std::vector<double>& radii, const FeatureSet& points) {
  std::size_t inside = 0;
  for (const auto& p : points) {
    for (std::size_t i = 0; i < balls.size(); ++i) {
      if (sq_dist(p, balls[i]) <= radii[i]) {
        ++inside;
        break;
      }
    }
  }
  return static_cast<double>(inside) / static_cast<double>(points.size());
}

}  // namespace

FeatureSet pooled_features(const std::vector<FloatImage>& images, const teacher::TeacherNet& teacher) {
  FeatureSet out(images.size());
  parallel_for(images.size(), [&](std::size_t i) { out[i] = teacher.pooled(images[i]); });
  return out;
}

double feature_frechet(const FeatureSet& a, const FeatureSet& b, double ridge) {
  const int d = check_set(a, 2, "feature_frechet");
  if (check_set(b, 2, "feature_frechet") != d) throw ShapeError("feature_frechet: descriptor sizes differ");
  const Eigen::MatrixXd ma = as_matrix(a), mb = as_matrix(b);
  const Eigen::RowVectorXd mu_a = ma.colwise().mean(), mu_b = mb.colwise().mean();
  const Eigen::MatrixXd ca = ma.rowwise() - mu_a, cb = mb.rowwise() - mu_b;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd sa = (ca.transpose() * ca) / static_cast<double>(a.size() - 1) + ridge * id;
  const Eigen::MatrixXd sb = (cb.transpose() * cb) / static_cast<double>(b.size() - 1) + ridge * id;

  // tr((S_A S_B)^(1/2)) = tr((S_A^(1/2) S_B S_A^(1/2))^(1/2)); the inner matrix is symmetric.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(sa);
  const Eigen::VectorXd la = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd root_a = ea.eigenvectors() * la.asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(inner, Eigen::EigenvaluesOnly);
  const double tr_root = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double mean_term = (mu_a - mu_b).squaredNorm();
  return std::max(0.0, mean_term + sa.trace() + sb.trace() - 2.0 * tr_root);
}

double poly_kernel(const std::vector<double>& x, const std::vector<double>& y) {
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  const double base = dot / static_cast<double>(x.size()) + 1.0;
  return base * base * base;
}

double mmd2_unbiased(const FeatureSet& a, const FeatureSet& b) {
  const int d = check_set(a, 2, "mmd2_unbiased");
  if (check_set(b, 2, "mmd2_unbiased") != d) throw ShapeError("mmd2_unbiased: descriptor sizes differ");
  const double m = static_cast<double>(a.size()), n = static_cast<double>(b.size());
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (i != j) kxx += poly_kernel(a[i], a[j]);
    }
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (i != j) kyy += poly_kernel(b[i], b[j]);
    }
  }
  for (const auto& x : a) {
    for (const auto& y : b) kxy += poly_kernel(x, y);
  }
  return kxx / (m * (m - 1)) + kyy / (n * (n - 1)) - 2.0 * kxy / (m * n);
}

double kernel_mmd(const FeatureSet& a, const FeatureSet& b, const KidConfig& cfg) {
  if (cfg.subsets < 1 || cfg.subset_size < 2) throw ConfigError("kernel_mmd: need subsets >= 1 and subset_size >= 2");
  if (static_cast<std::size_t>(cfg.subset_size) > a.size() || static_cast<std::size_t>(cfg.subset_size) > b.size()) {
    throw ConfigError("kernel_mmd: subset size " + std::to_string(cfg.subset_size) + " exceeds set sizes " +
                      std::to_string(a.size()) + "/" + std::to_string(b.size()));
  }
  Rng rng(cfg.seed);
  auto draw = [&](const FeatureSet& s) {
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < cfg.subset_size; ++i) {
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    }
    FeatureSet out;
    out.reserve(cfg.subset_size);
    for (int i = 0; i < cfg.subset_size; ++i) out.push_back(s[idx[i]]);
    return out;
  };
  double total = 0.0;
  for (int s = 0; s < cfg.subsets; ++s) {
    const auto sa = draw(a);
    const auto sb = draw(b);
    total += mmd2_unbiased(sa, sb);
  }
  return total / cfg.subsets;
}

PrecisionRecall knn_precision_recall(const FeatureSet& real, const FeatureSet& gen, int k) {
  if (k < 1) throw ConfigError("knn_precision_recall: k must be positive");
  const int d = check_set(real, k + 1, "knn_precision_recall");
  if (check_set(gen, k + 1, "knn_precision_recall") != d) {
    throw ShapeError("knn_precision_recall: descriptor sizes differ");
  }
  const auto r_real = knn_radii(real, k);
  const auto r_gen = knn_radii(gen, k);
  const auto zero = [](const std::vector<double>& r) { return std::count(r.begin(), r.end(), 0.0); };
  if (zero(r_real) || zero(r_gen)) {
    spdlog::warn("knn_precision_recall: {} real / {} generated points have zero radius (duplicate features)",
                 zero(r_real), zero(r_gen));
  }
  return {coverage(real, r_real, gen), coverage(gen, r_gen, real)};
}

double perceptual_distance(const FloatImage& a, const FloatImage& b, const teacher::TeacherNet& teacher) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ShapeError("perceptual_distance: image shapes differ");
  }
  const auto fa = teacher.extract(a);
  const auto fb = teacher.extract(b);
  double s = 0.0;
  for (std::size_t i = 0; i < fa.data.size(); ++i) {
    const double d = fa.data[i] - fb.data[i];
    s += d * d;
  }
  return s / static_cast<double>(fa.data.size());
}

}  // namespace emap::metrics
