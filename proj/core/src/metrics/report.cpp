// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/metrics/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/parallel.hpp"
#include "earthmapper/metrics/features.hpp"
#include "earthmapper/metrics/pixel.hpp"

namespace emap::metrics {

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [k, v] : r.values) {
    if (std::isinf(v)) {
      values[k] = v > 0 ? "inf" : "-inf";
    } else {
      values[k] = v;
    }
  }
  return {{"direction", r.direction}, {"label", r.label}, {"values", values}, {"counts", r.counts},
          {"config", r.config}};
}

MetricReport report_from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    r.direction = j.at("direction").get<std::string>();
    r.label = j.at("label").get<std::string>();
    for (const auto& [k, v] : j.at("values").items()) {
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s != "inf" && s != "-inf") throw IntegrityError("metric report: bad value '" + s + "' for " + k);
        r.values[k] = s == "inf" ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      } else {
        r.values[k] = v.get<double>();
      }
    }
    r.counts = j.at("counts").get<std::map<std::string, std::int64_t>>();
    r.config = j.at("config");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("metric report: ") + e.what());
  }
}

std::string format_table(const MetricReport& r) {
  std::string out = fmt::format("{:<14}{:>16}\n", "direction", r.direction);
  out += fmt::format("{:<14}{:>16}\n", "features", r.label);
  for (const auto& [k, v] : r.values) {
    out += std::isinf(v) ? fmt::format("{:<14}{:>16}\n", k, v > 0 ? "inf" : "-inf")
                         : fmt::format("{:<14}{:>16.6f}\n", k, v);
  }
  for (const auto& [k, v] : r.counts) out += fmt::format("{:<14}{:>16}\n", "n_" + k, v);
  return out;
}

namespace {

void check_pairs(const std::vector<FloatImage>& truth, const std::vector<FloatImage>& generated) {
  if (truth.empty()) throw UsageError("nothing to evaluate: empty image set");
  if (truth.size() != generated.size()) {
    throw ShapeError("evaluation sets differ in size: " + std::to_string(truth.size()) + " vs " +
                     std::to_string(generated.size()));
  }
}

}  // namespace

MetricReport score_pixels(const std::vector<FloatImage>& truth, const std::vector<FloatImage>& generated,
                          const teacher::TeacherNet& teacher) {
  check_pairs(truth, generated);
  const std::size_t n = truth.size();
  std::vector<double> s(n), p(n), e(n), l(n);
  parallel_for(n, [&](std::size_t i) {
    s[i] = ssim(truth[i], generated[i]);
    p[i] = psnr(truth[i], generated[i]);
    e[i] = rmse(truth[i], generated[i]);
    l[i] = perceptual_distance(truth[i], generated[i], teacher);
  });
  auto avg = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return t / static_cast<double>(v.size());
  };
  double psnr_sum = 0.0;
  std::int64_t finite = 0;
  for (double x : p) {
    if (std::isfinite(x)) {
      psnr_sum += x;
      ++finite;
    }
  }
  MetricReport r;
  r.values["ssim"] = avg(s);
  r.values["psnr"] = finite ? psnr_sum / finite : std::numeric_limits<double>::infinity();
  r.values["rmse"] = avg(e);
  r.values["perceptual"] = avg(l);
  r.counts["pairs"] = static_cast<std::int64_t>(n);
  r.counts["psnr_inf"] = static_cast<std::int64_t>(n) - finite;
  return r;
}

MetricReport score_distribution(const std::vector<FloatImage>& truth, const std::vector<FloatImage>& generated,
                                const teacher::TeacherNet& teacher, std::uint64_t seed) {
  check_pairs(truth, generated);
  const auto fr = pooled_features(truth, teacher);
  const auto fg = pooled_features(generated, teacher);
  MetricReport r;
  r.values["fid"] = feature_frechet(fr, fg);
  const int subset = static_cast<int>(std::min<std::size_t>(100, fr.size()));
  r.values["kid"] = kernel_mmd(fr, fg, {.subsets = 10, .subset_size = subset, .seed = seed});
  const auto pr = knn_precision_recall(fr, fg, 3);
  r.values["precision"] = pr.precision;
  r.values["recall"] = pr.recall;
  r.counts["pairs"] = static_cast<std::int64_t>(fr.size());
  r.counts["kid_subset"] = subset;
  return r;
}

}  // namespace emap::metrics
