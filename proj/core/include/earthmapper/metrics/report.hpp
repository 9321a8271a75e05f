// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earthmapper/common/image.hpp"
#include "earthmapper/teacher/teacher.hpp"

namespace emap::metrics {

inline constexpr const char* kFeatureLabel = "teacher-feature";

struct MetricReport {
  std::string direction;
  /// Marks values computed on teacher features rather than Inception/VGG.
  std::string label = kFeatureLabel;
  std::map<std::string, double> values;
  std::map<std::string, std::int64_t> counts;
  nlohmann::json config = nlohmann::json::object();

  bool operator==(const MetricReport&) const = default;
};

/// Canonical JSON; infinite values are written as the string "inf".
nlohmann::json to_json(const MetricReport& r);
MetricReport report_from_json(const nlohmann::json& j);

/// Fixed-width two-column table.
std::string format_table(const MetricReport& r);

/// ssim, psnr, rmse and perceptual averaged over aligned pairs. Pairs with
/// infinite PSNR are left out of the PSNR mean and counted in
/// counts["psnr_inf"]; if every pair is infinite the mean is +inf.
MetricReport score_pixels(const std::vector<FloatImage>& truth, const std::vector<FloatImage>& generated,
                          const teacher::TeacherNet& teacher);

/// fid, kid, precision, recall on pooled teacher descriptors. The KID subset
/// size is min(100, set size).
MetricReport score_distribution(const std::vector<FloatImage>& truth, const std::vector<FloatImage>& generated,
                                const teacher::TeacherNet& teacher, std::uint64_t seed = 0);

}  // namespace emap::metrics
