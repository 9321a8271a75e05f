// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/infer/generate.hpp"

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/hash.hpp"
#include "earthmapper/common/rng.hpp"

namespace emap::infer {

using gjsa::kMap;
using gjsa::kSat;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::map2sat: return "map2sat";
    case Mode::sat2map: return "sat2map";
    case Mode::coord_only: return "coord_only";
    case Mode::inpaint: return "inpaint";
    case Mode::outpaint: return "outpaint";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::map2sat, Mode::sat2map, Mode::coord_only, Mode::inpaint, Mode::outpaint})
    if (to_string(m) == s) return m;
  throw UsageError("unknown generation mode '" + s + "'");
}

Canvas Canvas::empty(const hrq::ScaleSchedule& sched, int depth) {
  Canvas c;
  c.sat.depth = c.map.depth = depth;
  for (int k = 0; k < sched.count(); ++k) {
    c.sat.scales.emplace_back(static_cast<std::size_t>(sched.area(k)) * depth, 0);
    c.map.scales.emplace_back(static_cast<std::size_t>(sched.area(k)) * depth, 0);
  }
  return c;
}

void substitute_condition(Canvas& canvas, const hrq::TokenMap& cond, int modality, int k) {
  auto& dst = canvas.of(modality);
  if (cond.depth != dst.depth || cond.scales.size() != dst.scales.size() || k < 0 ||
      k >= static_cast<int>(dst.scales.size()) || cond.scales[k].size() != dst.scales[k].size()) {
    throw ShapeError("substitute_condition: condition tokens do not match the canvas schedule");
  }
  dst.scales[k] = cond.scales[k];
}

std::vector<std::vector<std::uint8_t>> downsample_mask(const std::vector<std::uint8_t>& mask, int side,
                                                       const hrq::ScaleSchedule& sched) {
  if (static_cast<std::int64_t>(mask.size()) != static_cast<std::int64_t>(side) * side) {
    throw ShapeError("mask has " + std::to_string(mask.size()) + " entries, expected " + std::to_string(side) + "^2");
  }
  std::vector<std::vector<std::uint8_t>> out;
  for (int k = 0; k < sched.count(); ++k) {
    const int h = sched.height(k), w = sched.width(k);
    std::vector<std::uint8_t> cells(static_cast<std::size_t>(h) * w);
    for (int cy = 0; cy < h; ++cy) {
      for (int cx = 0; cx < w; ++cx) {
        const int y0 = cy * side / h, y1 = (cy + 1) * side / h, x0 = cx * side / w, x1 = (cx + 1) * side / w;
        std::int64_t known = 0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) known += mask[static_cast<std::size_t>(y) * side + x] == 0;
        const std::int64_t total = static_cast<std::int64_t>(y1 - y0) * (x1 - x0);
        cells[static_cast<std::size_t>(cy) * w + cx] = 2 * known > total ? 0 : 1;
      }
    }
    out.push_back(std::move(cells));
  }
  return out;
}

std::vector<std::uint8_t> outpaint_mask(int side) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(side) * side, 1);
  const int lo = side / 4, hi = side - side / 4;
  for (int y = lo; y < hi; ++y)
    for (int x = lo; x < hi; ++x) m[static_cast<std::size_t>(y) * side + x] = 0;
  return m;
}

namespace {

struct Plan {
  int cond_modality = -1;           // substituted every scale
  hrq::TokenMap cond;               // tokens of the condition image
  int known_modality = -1;          // clamped where the mask keeps the input
  hrq::TokenMap known;
  std::vector<std::vector<std::uint8_t>> regen;  // per scale, 1 = generated
  int complexity_modality = -1;     // -1 pools both
};

const RgbImage& need(const std::optional<RgbImage>& img, const char* what, Mode m) {
  if (!img) throw UsageError(to_string(m) + " needs a " + what + " image");
  return *img;
}

hrq::TokenMap tokenize(const hrq::Tokenizer& tok, const RgbImage& img) {
  const int side = tok.image_side();
  if (img.width != side || img.height != side) {
    throw ShapeError("input image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                     ", the tokenizer expects " + std::to_string(side) + "x" + std::to_string(side));
  }
  return tok.encode(img);
}

Plan make_plan(const hrq::Tokenizer& tok, const GenerateRequest& req) {
  Plan p;
  switch (req.mode) {
    case Mode::map2sat:
      p.cond_modality = kMap;
      p.cond = tokenize(tok, need(req.map, "map", req.mode));
      p.complexity_modality = kSat;
      break;
    case Mode::sat2map:
      p.cond_modality = kSat;
      p.cond = tokenize(tok, need(req.sat, "satellite", req.mode));
      p.complexity_modality = kMap;
      break;
    case Mode::coord_only:
      break;
    case Mode::inpaint:
    case Mode::outpaint: {
      if (req.target != kSat && req.target != kMap) throw UsageError("completion target must be sat or map");
      const bool sat = req.target == kSat;
      p.known_modality = req.target;
      p.complexity_modality = req.target;
      p.known = tokenize(tok, need(sat ? req.sat : req.map, sat ? "satellite" : "map", req.mode));
      const auto& other = sat ? req.map : req.sat;
      if (other) {
        p.cond_modality = sat ? kMap : kSat;
        p.cond = tokenize(tok, *other);
      }
      std::vector<std::uint8_t> mask = req.mask;
      if (mask.empty()) {
        if (req.mode == Mode::inpaint) throw UsageError("inpaint needs a mask");
        mask = outpaint_mask(tok.image_side());
      }
      p.regen = downsample_mask(mask, tok.image_side(), tok.sched);
      break;
    }
  }
  return p;
}

}  // namespace

template <class T>
GenerateResult generate(const gjsa::GjsaModel<T>& model, const hrq::Tokenizer& tok, const GenerateRequest& req,
                        const ScaleObserver& observer) {
  const auto& mc = model.config();
  if (mc.schedule != tok.sched || mc.vocab != tok.cb.K || mc.depth != tok.depth || mc.latent_dim != tok.cb.d) {
    throw ConfigError("generate: model and tokenizer disagree on schedule, vocabulary or depth");
  }
  req.keypoints.validate();
  req.guidance.validate();
  req.sampler.validate();
  const Plan plan = make_plan(tok, req);

  const auto& sched = tok.sched;
  const int n_scales = sched.count(), D = tok.depth, K = tok.cb.K;
  Rng rng(Rng::derive(req.sampler.seed, req.item));
  GenerateResult res;
  res.canvas = Canvas::empty(sched, D);
  auto& canvas = res.canvas;

  const gjsa::Conditioning cond{false, -1};
  const gjsa::Conditioning uncond{true, plan.cond_modality};

  for (int k = 0; k < n_scales; ++k) {
    ScaleTrace tr;
    tr.scale = k;
    if (k > 0) {
      std::vector<int> first;
      for (int m : {kSat, kMap}) {
        if (plan.complexity_modality >= 0 && m != plan.complexity_modality) continue;
        const auto& prev = canvas.of(m).scales[k - 1];
        for (std::size_t i = 0; i < prev.size(); i += D) first.push_back(prev[i]);
      }
      tr.complexity = complexity(first);
    }
    tr.strength = guidance_strength(k, n_scales, tr.complexity, K, req.guidance);

    const auto seq = gjsa::build_prefix(canvas.sat, canvas.map, req.geo, tok.cb, sched, k);
    const auto batch = gjsa::make_batch({&seq, &seq}, {cond, uncond}, mc);
    const auto logits = model.logits(batch);
    const int L = batch.length, n = sched.area(k);

    for (int m : {kSat, kMap}) {
      const int first_slot = gjsa::slot_index(sched, k, m, 0);
      auto& dst = canvas.of(m).scales[k];
      for (int j = 0; j < D; ++j) {
        const auto& lg = logits[j];
        num::Tensor<T> c({n, K}), u({n, K});
        std::copy_n(lg.ptr() + static_cast<std::ptrdiff_t>(first_slot) * K, n * K, c.ptr());
        std::copy_n(lg.ptr() + static_cast<std::ptrdiff_t>(L + first_slot) * K, n * K, u.ptr());
        const auto blended = cfg_blend(u, c, tr.strength);
        std::vector<double> row(K);
        for (int p = 0; p < n; ++p) {
          std::copy_n(blended.ptr() + static_cast<std::ptrdiff_t>(p) * K, K, row.begin());
          dst[static_cast<std::size_t>(p) * D + j] = top_k_top_p_sample(row, req.sampler, rng);
        }
      }
    }

    if (plan.cond_modality >= 0) {
      const int target = 1 - plan.cond_modality;
      const auto& qc = plan.cond.scales[k];
      auto& qg = canvas.of(target).scales[k];
      const auto keys = select_keypoints(normalize_indices(qc, K), req.keypoints.tau);
      qg = apply_kpf(qg, qc, keys, K, req.keypoints.variant);
      tr.keypoints = static_cast<int>(keys.size());
      substitute_condition(canvas, plan.cond, plan.cond_modality, k);
      tr.substituted = n;
    }
    if (plan.known_modality >= 0) {
      auto& dst = canvas.of(plan.known_modality).scales[k];
      const auto& src = plan.known.scales[k];
      for (int p = 0; p < n; ++p) {
        if (plan.regen[k][p]) continue;
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(p) * D, D, dst.begin() + static_cast<std::ptrdiff_t>(p) * D);
        ++tr.clamped;
      }
    }
    canvas.filled = k + 1;
    res.trace.push_back(tr);
    if (observer) observer(tr, canvas);
  }
  res.sat = tok.decode(canvas.sat);
  res.map = tok.decode(canvas.map);
  return res;
}

template GenerateResult generate(const gjsa::GjsaModel<float>&, const hrq::Tokenizer&, const GenerateRequest&,
                                 const ScaleObserver&);
template GenerateResult generate(const gjsa::GjsaModel<double>&, const hrq::Tokenizer&, const GenerateRequest&,
                                 const ScaleObserver&);

nlohmann::json sidecar_json(const GenerateRequest& req, const GenerateResult& res, const std::string& checkpoint_sha256) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : res.trace) {
    trace.push_back({{"scale", t.scale},
                     {"complexity", t.complexity},
                     {"strength", t.strength},
                     {"keypoints", t.keypoints},
                     {"substituted", t.substituted},
                     {"clamped", t.clamped}});
  }
  return {{"mode", to_string(req.mode)},
          {"seed", req.sampler.seed},
          {"item", req.item},
          {"tau", req.keypoints.tau},
          {"keypoints", to_json(req.keypoints)},
          {"guidance", to_json(req.guidance)},
          {"sampler", to_json(req.sampler)},
          {"geo", {{"lat", req.geo.lat_deg}, {"lon", req.geo.lon_deg}}},
          {"checkpoint_sha256", checkpoint_sha256},
          {"trace", trace},
          {"outputs",
           {{"sat_png_sha256", sha256_hex(encode_png(res.sat))}, {"map_png_sha256", sha256_hex(encode_png(res.map))}}}};
}

}  // namespace emap::infer
