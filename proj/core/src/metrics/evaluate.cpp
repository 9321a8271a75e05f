// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/metrics/evaluate.hpp"

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/parallel.hpp"
#include "earthmapper/common/resize.hpp"

namespace emap::metrics {

RgbImage resize_image(const RgbImage& img, int side) {
  if (img.width == side && img.height == side) return img;
  const auto f = to_float(img);
  FloatImage out(side, side, 3);
  out.data = resize_bilinear(f.data, f.height, f.width, 3, side, side);
  return to_rgb8(out);
}

std::vector<EvalPair> load_split(const geotile::Manifest& m, const std::filesystem::path& base_dir,
                                 geotile::Split split, int side, std::size_t limit) {
  auto recs = m.split(split);
  if (limit > 0 && recs.size() > limit) recs.resize(limit);
  std::vector<EvalPair> out(recs.size());
  parallel_for(recs.size(), [&](std::size_t i) {
    out[i].sat = resize_image(read_png(geotile::resolve(base_dir, recs[i].sat_image_path)), side);
    out[i].map = resize_image(read_png(geotile::resolve(base_dir, recs[i].map_image_path)), side);
    out[i].geo = recs[i].center();
  });
  return out;
}

template <class T>
MetricReport evaluate(const std::vector<EvalPair>& pairs, const gjsa::Checkpoint<T>& ckpt, infer::Mode direction,
                      const EvalConfig& cfg) {
  if (direction != infer::Mode::map2sat && direction != infer::Mode::sat2map) {
    throw UsageError("evaluate: direction must be map2sat or sat2map");
  }
  if (pairs.empty()) throw UsageError("evaluate: the split is empty");
  const bool to_sat = direction == infer::Mode::map2sat;
  const auto guidance =
      cfg.guidance.value_or(to_sat ? infer::GuidanceSchedule::map2sat() : infer::GuidanceSchedule::sat2map());

  std::vector<FloatImage> truth(pairs.size()), generated(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    infer::GenerateRequest req;
    req.mode = direction;
    req.geo = pairs[i].geo;
    if (to_sat) req.map = pairs[i].map;
    else req.sat = pairs[i].sat;
    req.keypoints = cfg.keypoints;
    req.guidance = guidance;
    req.sampler = cfg.sampler;
    req.item = i;
    const auto res = infer::generate(ckpt.model, ckpt.tokenizer, req);
    truth[i] = to_float(to_sat ? pairs[i].sat : pairs[i].map);
    generated[i] = to_float(to_sat ? res.sat : res.map);
  });

  const teacher::TeacherNet teacher(ckpt.teacher_seed, ckpt.teacher_config);
  auto report = to_sat ? score_distribution(truth, generated, teacher, cfg.sampler.seed)
                       : score_pixels(truth, generated, teacher);
  report.direction = infer::to_string(direction);
  report.counts["pairs"] = static_cast<std::int64_t>(pairs.size());
  report.config.update({{"split", geotile::to_string(cfg.split)},
                        {"checkpoint_step", ckpt.step},
                        {"guidance", infer::to_json(guidance)},
                        {"keypoints", infer::to_json(cfg.keypoints)},
                        {"sampler", infer::to_json(cfg.sampler)}});
  return report;
}

template <class T>
MetricReport evaluate(const geotile::Manifest& m, const std::filesystem::path& base_dir,
                      const gjsa::Checkpoint<T>& ckpt, infer::Mode direction, const EvalConfig& cfg) {
  return evaluate(load_split(m, base_dir, cfg.split, ckpt.tokenizer.image_side(), cfg.limit), ckpt, direction, cfg);
}

template MetricReport evaluate(const std::vector<EvalPair>&, const gjsa::Checkpoint<float>&, infer::Mode,
                               const EvalConfig&);
template MetricReport evaluate(const std::vector<EvalPair>&, const gjsa::Checkpoint<double>&, infer::Mode,
                               const EvalConfig&);
template MetricReport evaluate(const geotile::Manifest&, const std::filesystem::path&, const gjsa::Checkpoint<float>&,
                               infer::Mode, const EvalConfig&);
template MetricReport evaluate(const geotile::Manifest&, const std::filesystem::path&,
                               const gjsa::Checkpoint<double>&, infer::Mode, const EvalConfig&);

}  // namespace emap::metrics
