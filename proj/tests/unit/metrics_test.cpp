// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/rng.hpp"
#include "earthmapper/metrics/features.hpp"
#include "earthmapper/metrics/pixel.hpp"
#include "earthmapper/metrics/report.hpp"
#include "earthmapper/synthdata/synth.hpp"
#include "support/oracles.hpp"

namespace emap::metrics {
namespace {

FloatImage random_image(int w, int h, Rng& rng) {
  FloatImage img(w, h);
  for (auto& v : img.data) v = rng.uniform();
  return img;
}

FloatImage constant_image(int side, double v) {
  FloatImage img(side, side);
  for (auto& x : img.data) x = v;
  return img;
}

testing::Planes planes(const FloatImage& img) {
  testing::Planes p(img.channels, std::vector<std::vector<double>>(img.height, std::vector<double>(img.width)));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) p[c][y][x] = img.at(x, y, c);
  return p;
}

TEST(PixelMetrics, IdenticalImages) {
  Rng rng(1);
  const auto a = random_image(32, 32, rng);
  EXPECT_EQ(rmse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(ssim(a, a), 1.0);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_GT(psnr(a, a), 0.0);
}

TEST(PixelMetrics, OppositeConstants) {
  const auto a = constant_image(16, 0.0), b = constant_image(16, 1.0);
  EXPECT_EQ(rmse(a, b), 1.0);
  EXPECT_EQ(psnr(a, b), 0.0);
}

TEST(PixelMetrics, ShapeMismatch) {
  EXPECT_THROW(rmse(FloatImage(8, 8), FloatImage(8, 9)), ShapeError);
  EXPECT_THROW(ssim(FloatImage(8, 8), FloatImage(8, 8, 1)), ShapeError);
}

TEST(PixelMetrics, SsimSymmetric) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_image(24, 20, rng), b = random_image(24, 20, rng);
    EXPECT_EQ(ssim(a, b), ssim(b, a));
  }
}

TEST(PixelMetrics, MatchNaiveOracleOnEightByEight) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto a = random_image(8, 8, rng), b = random_image(8, 8, rng);
    const auto pa = planes(a), pb = planes(b);
    const double m = testing::oracle_mse(pa, pb);
    EXPECT_EQ(rmse(a, b), std::sqrt(m));
    EXPECT_EQ(psnr(a, b), 10.0 * std::log10(1.0 / m));
    // An 11x11 window does not fit; the largest odd window that does is 7.
    EXPECT_EQ(ssim(a, b), testing::oracle_ssim(pa, pb, 7, 1.5));
  }
}

TEST(PixelMetrics, MatchNaiveOracleWithFullWindow) {
  Rng rng(4);
  const auto a = random_image(19, 15, rng), b = random_image(19, 15, rng);
  EXPECT_EQ(ssim(a, b), testing::oracle_ssim(planes(a), planes(b), 11, 1.5));
}

TEST(PixelMetrics, SsimInRange) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_image(16, 16, rng);
    auto b = a;
    for (auto& v : b.data) v = 1.0 - v;
    const double s = ssim(a, b);
    EXPECT_GE(s, -1.0);
    EXPECT_LT(s, 0.0);
  }
}

FeatureSet gaussian_set(int n, int d, double mean, Rng& rng) {
  FeatureSet s(n, std::vector<double>(d));
  for (auto& row : s)
    for (auto& v : row) v = rng.normal(mean, 1.0);
  return s;
}

TEST(Frechet, IdenticalSetsAreZero) {
  Rng rng(6);
  const auto s = gaussian_set(40, 16, 0.0, rng);
  EXPECT_LT(feature_frechet(s, s), 1e-6);
  // Fewer samples than dimensions: singular covariances rely on the ridge.
  const auto thin = gaussian_set(10, 64, 0.3, rng);
  EXPECT_LT(feature_frechet(thin, thin), 1e-6);
}

TEST(Frechet, UnivariateShiftedGaussians) {
  Rng rng(7);
  const auto a = gaussian_set(10000, 1, 0.0, rng);
  const auto b = gaussian_set(10000, 1, 1.0, rng);
  // Equal variances: the distance reduces to (mu_a - mu_b)^2 = 1.
  EXPECT_NEAR(feature_frechet(a, b), 1.0, 0.1);
}

TEST(Frechet, Symmetric) {
  Rng rng(8);
  const auto a = gaussian_set(50, 8, 0.0, rng);
  const auto b = gaussian_set(60, 8, 0.5, rng);
  EXPECT_NEAR(feature_frechet(a, b), feature_frechet(b, a), 1e-9);
  EXPECT_GT(feature_frechet(a, b), 0.0);
}

TEST(Frechet, NeedsTwoSamples) {
  Rng rng(9);
  EXPECT_THROW(feature_frechet(gaussian_set(1, 4, 0, rng), gaussian_set(5, 4, 0, rng)), UsageError);
}

TEST(Kid, MatchesDoubleLoopOracle) {
  Rng rng(10);
  for (int t = 0; t < 5; ++t) {
    const auto a = gaussian_set(20, 6, 0.0, rng);
    const auto b = gaussian_set(20, 6, 0.4, rng);
    EXPECT_NEAR(mmd2_unbiased(a, b), testing::oracle_mmd2(a, b), 1e-10);
    // Subsets of the full size are permutations, so the estimate is unchanged.
    EXPECT_NEAR(kernel_mmd(a, b, {.subsets = 3, .subset_size = 20, .seed = 1}), testing::oracle_mmd2(a, b), 1e-10);
  }
}

TEST(Kid, SameSamplesNearZero) {
  Rng rng(11);
  const auto a = gaussian_set(150, 8, 0.0, rng);
  EXPECT_LE(kernel_mmd(a, a), 1e-6);
}

TEST(Kid, DisjointConstantsPositive) {
  const FeatureSet a(120, std::vector<double>(4, 0.0));
  const FeatureSet b(120, std::vector<double>(4, 2.0));
  EXPECT_GT(kernel_mmd(a, b), 0.0);
}

TEST(Kid, SubsetLargerThanSetIsConfigError) {
  Rng rng(12);
  const auto a = gaussian_set(50, 4, 0.0, rng);
  EXPECT_THROW(kernel_mmd(a, a), ConfigError);
}

TEST(PrecisionRecall, SameSetIsPerfect) {
  Rng rng(13);
  const auto a = gaussian_set(60, 5, 0.0, rng);
  const auto pr = knn_precision_recall(a, a);
  EXPECT_EQ(pr.precision, 1.0);
  EXPECT_EQ(pr.recall, 1.0);
}

TEST(PrecisionRecall, FarShiftHasNoPrecision) {
  Rng rng(14);
  const auto a = gaussian_set(60, 5, 0.0, rng);
  const auto b = gaussian_set(60, 5, 100.0, rng);
  const auto pr = knn_precision_recall(a, b);
  EXPECT_EQ(pr.precision, 0.0);
  EXPECT_EQ(pr.recall, 0.0);
}

FeatureSet ring(int n, double cx, double radius, double jitter, Rng& rng) {
  FeatureSet s;
  for (int i = 0; i < n; ++i) {
    const double t = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double r = radius + rng.normal(0.0, jitter);
    s.push_back({cx + r * std::cos(t), r * std::sin(t)});
  }
  return s;
}

// Exhaustive membership count: sort all neighbour distances and take the k-th.
double oracle_coverage(const FeatureSet& balls, const FeatureSet& points, int k) {
  std::vector<double> radius;
  for (std::size_t i = 0; i < balls.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < balls.size(); ++j) {
      if (i == j) continue;
      d.push_back(std::pow(balls[i][0] - balls[j][0], 2) + std::pow(balls[i][1] - balls[j][1], 2));
    }
    std::sort(d.begin(), d.end());
    radius.push_back(d[k - 1]);
  }
  int hits = 0;
  for (const auto& p : points) {
    bool in = false;
    for (std::size_t i = 0; i < balls.size() && !in; ++i) {
      in = std::pow(p[0] - balls[i][0], 2) + std::pow(p[1] - balls[i][1], 2) <= radius[i];
    }
    hits += in;
  }
  return static_cast<double>(hits) / static_cast<double>(points.size());
}

TEST(PrecisionRecall, OverlappingRingsMatchBruteForce) {
  Rng rng(15);
  const auto real = ring(200, 0.0, 1.0, 0.05, rng);
  const auto gen = ring(150, 0.8, 1.0, 0.05, rng);
  const auto pr = knn_precision_recall(real, gen, 3);
  EXPECT_EQ(pr.precision, oracle_coverage(real, gen, 3));
  EXPECT_EQ(pr.recall, oracle_coverage(gen, real, 3));
  EXPECT_GT(pr.precision, 0.0);
  EXPECT_LT(pr.precision, 1.0);
}

TEST(PrecisionRecall, NeedsMoreThanK) {
  Rng rng(16);
  EXPECT_THROW(knn_precision_recall(gaussian_set(3, 2, 0, rng), gaussian_set(10, 2, 0, rng), 3), UsageError);
}

TEST(Perceptual, ZeroSymmetricAndMonotoneInNoise) {
  const teacher::TeacherNet t(3);
  const auto clean = to_float(synthdata::generate_pair({.seed = 4, .size = 64}).sat);
  EXPECT_EQ(perceptual_distance(clean, clean, t), 0.0);

  Rng rng(17);
  std::vector<double> pattern(clean.data.size());
  for (auto& v : pattern) v = rng.uniform(-1.0, 1.0);
  double prev = 0.0;
  for (int level = 1; level <= 10; ++level) {
    auto noisy = clean;
    for (std::size_t i = 0; i < noisy.data.size(); ++i) noisy.data[i] += 0.02 * level * pattern[i];
    const double d = perceptual_distance(clean, noisy, t);
    EXPECT_EQ(d, perceptual_distance(noisy, clean, t));
    EXPECT_GT(d, prev) << "level " << level;
    prev = d;
  }
}

TEST(Report, GroundTruthAgainstItself) {
  const teacher::TeacherNet t(5);
  std::vector<FloatImage> imgs;
  for (int i = 0; i < 12; ++i) imgs.push_back(to_float(synthdata::generate_pair({.seed = 100u + i, .size = 64}).map));
  const auto px = score_pixels(imgs, imgs, t);
  EXPECT_DOUBLE_EQ(px.values.at("ssim"), 1.0);
  EXPECT_EQ(px.values.at("rmse"), 0.0);
  EXPECT_TRUE(std::isinf(px.values.at("psnr")));
  EXPECT_EQ(px.counts.at("psnr_inf"), 12);
  const auto dist = score_distribution(imgs, imgs, t);
  EXPECT_LT(dist.values.at("fid"), 1e-6);
  EXPECT_EQ(dist.label, "teacher-feature");
}

TEST(Report, JsonRoundTrip) {
  MetricReport r;
  r.direction = "sat2map";
  r.values = {{"ssim", 0.123456789012345678}, {"psnr", std::numeric_limits<double>::infinity()}, {"rmse", 1e-17}};
  r.counts = {{"pairs", 7}, {"psnr_inf", 7}};
  r.config = {{"seed", 3}};
  const auto j = to_json(r);
  EXPECT_EQ(j["values"]["psnr"], "inf");
  EXPECT_EQ(report_from_json(j), r);
  EXPECT_EQ(report_from_json(nlohmann::json::parse(j.dump())), r);
  EXPECT_THROW(report_from_json(nlohmann::json{{"direction", 1}}), IntegrityError);
}

TEST(Report, EmptySetIsUsageError) {
  const teacher::TeacherNet t(5);
  EXPECT_THROW(score_pixels({}, {}, t), UsageError);
}

}  // namespace
}  // namespace emap::metrics
