// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "earthmapper/common/error.hpp"
#include "earthmapper/common/hash.hpp"
#include "earthmapper/gjsa/train.hpp"
#include "earthmapper/infer/generate.hpp"
#include "earthmapper/metrics/evaluate.hpp"
#include "earthmapper/metrics/pixel.hpp"

namespace emap::cli {
namespace {

geotile::Manifest open_manifest(const std::filesystem::path& path, Context& ctx) {
  if (!std::filesystem::exists(path)) {
    throw UsageError("no manifest at " + path.string() + "; run synth, tile or fetch first, or pass --manifest");
  }
  ctx.record->add_input(path);
  return geotile::read_manifest(path);
}

// Side of the first training image; the corpus is assumed to be uniform.
int corpus_side(const geotile::Manifest& m, const std::filesystem::path& base) {
  if (m.records.empty()) throw UsageError("manifest has no records");
  return read_png(geotile::resolve(base, m.records.front().sat_image_path)).width;
}

std::vector<metrics::EvalPair> train_pairs(const geotile::Manifest& m, const std::filesystem::path& base, int side,
                                           std::size_t limit) {
  auto pairs = metrics::load_split(m, base, geotile::Split::train, side, limit);
  if (pairs.empty()) throw UsageError("manifest has no train records");
  return pairs;
}

std::filesystem::path require_checkpoint(Resolver& r, const std::optional<std::string>& flag, Context& ctx) {
  const auto path = r.path("checkpoint", flag, ctx.ws.checkpoint());
  if (!std::filesystem::exists(path)) {
    throw UsageError("no checkpoint at " + path.string() + "; run train first or pass --checkpoint");
  }
  ctx.record->add_input(path);
  return path;
}

void add_sampling_flags(CLI::App* c, SamplingFlags& s) {
  c->add_option("--seed", s.seed, "Sampling seed (default 0)");
  c->add_option("--tau", s.tau, "Key point threshold; 1 disables key point force (default 0.95)");
  c->add_option("--kpf-variant", s.kpf_variant, "add | substitute (default add)");
  c->add_option("--guidance-fixed", s.guidance_fixed, "Fixed per-scale guidance strengths")->expected(1, -1);
  c->add_option("--gamma", s.gamma, "Base strength of the complexity-driven guidance");
  c->add_option("--top-k", s.top_k, "Top-k cut (default 100)");
  c->add_option("--top-p", s.top_p, "Nucleus mass (default 0.55)");
  c->add_option("--temperature", s.temperature, "Softmax temperature (default 1)");
}

struct Sampling {
  infer::KeyPointConfig keypoints;
  infer::SamplerConfig sampler;
  std::optional<infer::GuidanceSchedule> guidance;  // unset: per-direction default
};

Sampling resolve_sampling(Resolver& r, const SamplingFlags& s) {
  Sampling out;
  out.sampler.seed = r("seed", s.seed, std::uint64_t{0});
  out.sampler.top_k = r("top_k", s.top_k, out.sampler.top_k);
  out.sampler.top_p = r("top_p", s.top_p, out.sampler.top_p);
  out.sampler.temperature = r("temperature", s.temperature, out.sampler.temperature);
  out.sampler.validate();
  out.keypoints.tau = r("tau", s.tau, out.keypoints.tau);
  const auto variant = r("kpf_variant", s.kpf_variant, std::string("add"));
  if (variant == "add") out.keypoints.variant = infer::KpfVariant::add;
  else if (variant == "substitute") out.keypoints.variant = infer::KpfVariant::substitute;
  else throw ConfigError("kpf_variant must be add or substitute, got '" + variant + "'");
  out.keypoints.validate();
  const auto fixed = r.optional("guidance_fixed", s.guidance_fixed);
  const auto gamma = r.optional("gamma", s.gamma);
  if (fixed && gamma) throw UsageError("--guidance-fixed and --gamma are mutually exclusive");
  if (fixed) out.guidance = infer::GuidanceSchedule::fixed_strengths(*fixed);
  if (gamma) {
    infer::GuidanceSchedule g;
    g.gamma = *gamma;
    out.guidance = g;
  }
  return out;
}

// Direction defaults keep their alpha/beta shape; an explicit gamma only rescales.
infer::GuidanceSchedule guidance_for(const Sampling& s, infer::Mode mode, int target) {
  const bool to_sat = mode == infer::Mode::map2sat ||
                      ((mode == infer::Mode::inpaint || mode == infer::Mode::outpaint) && target == gjsa::kSat);
  const bool to_map = mode == infer::Mode::sat2map ||
                      ((mode == infer::Mode::inpaint || mode == infer::Mode::outpaint) && target == gjsa::kMap);
  infer::GuidanceSchedule base = to_sat   ? infer::GuidanceSchedule::map2sat()
                                 : to_map ? infer::GuidanceSchedule::sat2map()
                                          : infer::GuidanceSchedule{};
  if (!s.guidance) return base;
  if (s.guidance->mode == infer::GuidanceSchedule::Mode::fixed) return *s.guidance;
  base.gamma = s.guidance->gamma;
  base.validate();
  return base;
}

RgbImage read_input(const std::filesystem::path& p, int side, Context& ctx) {
  ctx.record->add_input(p);
  RgbImage img = read_png(p);
  if (img.width != side || img.height != side) {
    spdlog::info("resizing {} from {}x{} to {}x{}", p.string(), img.width, img.height, side, side);
    img = metrics::resize_image(img, side);
  }
  return img;
}

void print_hash(const std::filesystem::path& p) { std::printf("%s  %s\n", sha256_file(p).c_str(), p.c_str()); }

}  // namespace

CLI::App* add_train_tokenizer(CLI::App& app, TokenizerOptions& o) {
  auto* c = app.add_subcommand("train-tokenizer", "Train the autoencoder and the shared residual codebook");
  c->add_option("--manifest", o.manifest, "Corpus manifest (default <workspace>/corpus/manifest.ndjson)");
  c->add_option("--out", o.out, "Tokenizer file (default <workspace>/tokenizer.emap)");
  c->add_option("--K", o.K, "Codebook size (default 512)");
  c->add_option("--depth", o.depth, "Residual depth D (default 2)");
  c->add_option("--latent-dim", o.latent_dim, "Latent channels (default 32)");
  c->add_option("--hidden", o.hidden, "Autoencoder hidden channels (default 64)");
  c->add_option("--patch", o.patch, "Patch size per encoder stage (default 4)");
  c->add_option("--steps", o.steps, "Autoencoder steps (default 1500)");
  c->add_option("--batch", o.batch, "Autoencoder batch (default 8)");
  c->add_option("--lr", o.lr, "Autoencoder learning rate (default 2e-3)");
  c->add_option("--kmeans-iters", o.kmeans_iters, "k-means iterations per fit (default 20)");
  c->add_option("--refits", o.refits, "Codebook refits on residuals (default 2)");
  c->add_option("--max-samples", o.max_samples, "k-means sample cap (default 60000)");
  c->add_option("--max-images", o.max_images, "Use at most this many train pairs; 0 = all (default 0)");
  c->add_option("--seed", o.seed, "Seed (default 0)");
  return c;
}

void run_train_tokenizer(const TokenizerOptions& o, Context& ctx) {
  Resolver r(ctx, "tokenizer");
  const auto manifest_path = r.path("manifest", o.manifest, ctx.ws.manifest());
  const auto out = r.path("out", o.out, ctx.ws.tokenizer());
  hrq::TokenizerConfig tc;
  tc.K = r("K", o.K, tc.K);
  tc.depth = r("depth", o.depth, tc.depth);
  tc.ae.latent_dim = r("latent_dim", o.latent_dim, tc.ae.latent_dim);
  tc.ae.hidden = r("hidden", o.hidden, tc.ae.hidden);
  tc.ae.patch = r("patch", o.patch, tc.ae.patch);
  tc.train.steps = r("steps", o.steps, tc.train.steps);
  tc.train.batch = r("batch", o.batch, tc.train.batch);
  tc.train.lr = r("lr", o.lr, tc.train.lr);
  tc.kmeans_iters = r("kmeans_iters", o.kmeans_iters, tc.kmeans_iters);
  tc.refits = r("refits", o.refits, tc.refits);
  tc.max_samples = r("max_samples", o.max_samples, tc.max_samples);
  const int max_images = r("max_images", o.max_images, 0);
  tc.seed = r("seed", o.seed, std::uint64_t{0});
  tc.train.seed = tc.seed;
  ctx.record->set_seed("tokenizer", tc.seed);

  const auto m = open_manifest(manifest_path, ctx);
  const auto base = manifest_path.parent_path();
  const auto pairs = train_pairs(m, base, corpus_side(m, base), static_cast<std::size_t>(std::max(0, max_images)));
  std::vector<RgbImage> images;
  for (const auto& p : pairs) {
    images.push_back(p.sat);
    images.push_back(p.map);
  }
  spdlog::info("training tokenizer on {} images", images.size());
  const auto tok = hrq::train_tokenizer(images, tc, [](const std::string& stage, int step, double v) {
    if (step % 100 == 0) spdlog::info("{} {} {:.5f}", stage, step, v);
  });
  gjsa::save_tokenizer(out, tok);
  ctx.record->add_output(out);

  double ps = 0, pm = 0;
  const std::size_t n = std::min<std::size_t>(pairs.size(), 16);
  for (std::size_t i = 0; i < n; ++i) {
    ps += metrics::psnr(tok.decode_float(tok.encode(pairs[i].sat)), to_float(pairs[i].sat));
    pm += metrics::psnr(tok.decode_float(tok.encode(pairs[i].map)), to_float(pairs[i].map));
  }
  ctx.record->note("reconstruction_psnr", {{"sat", ps / n}, {"map", pm / n}, {"pairs", n}});
  ctx.record->note("tokenizer", tok.describe());
  spdlog::info("tokenizer written to {}; reconstruction PSNR sat {:.2f} dB, map {:.2f} dB", out.string(), ps / n,
               pm / n);
}

CLI::App* add_train(CLI::App& app, TrainOptions& o) {
  auto* c = app.add_subcommand("train", "Train the joint-scale model");
  c->add_option("--manifest", o.manifest, "Corpus manifest (default <workspace>/corpus/manifest.ndjson)");
  c->add_option("--tokenizer", o.tokenizer, "Tokenizer file (default <workspace>/tokenizer.emap)");
  c->add_option("--out", o.out, "Checkpoint directory (default <workspace>/train)");
  c->add_option("--layers", o.layers, "Transformer blocks (default 4)");
  c->add_option("--width", o.width, "Model width (default 128)");
  c->add_option("--heads", o.heads, "Attention heads (default 4)");
  c->add_option("--mlp-ratio", o.mlp_ratio, "MLP expansion (default 4)");
  c->add_option("--steps", o.steps, "Total optimizer steps (default 2000)");
  c->add_option("--batch", o.batch, "Batch size (default 16)");
  c->add_option("--lr", o.lr, "Peak learning rate (default 1e-3)");
  c->add_option("--warmup", o.warmup, "Warmup steps (default 100)");
  c->add_option("--weight-decay", o.weight_decay, "AdamW weight decay (default 0.01)");
  c->add_option("--grad-clip", o.grad_clip, "Global gradient norm clip; 0 disables (default 1)");
  c->add_option("--sigma", o.sigma, "Semantic loss weight (default 0.5)");
  c->add_option("--geo-dims", o.geo_dims, "Sinusoidal dims per coordinate (default 32)");
  c->add_option("--geo-dropout", o.geo_dropout, "Null coordinate rate (default 0.1)");
  c->add_option("--cond-dropout", o.cond_dropout, "Null condition rate (default 0.1)");
  c->add_option("--teacher-seed", o.teacher_seed, "Teacher weight seed (default 7)");
  c->add_option("--teacher-hidden", o.teacher_hidden, "Teacher hidden channels (default 32)");
  c->add_option("--d-sem", o.d_sem, "Teacher feature channels (default 64)");
  c->add_option("--seed", o.seed, "Initialization and batch seed (default 0)");
  c->add_option("--checkpoint-every", o.checkpoint_every, "Periodic checkpoint interval; 0 = final only (default 500)");
  c->add_option("--resume", o.resume, "Continue from <out>/latest.emap when present (default false)");
  return c;
}

void run_train(const TrainOptions& o, Context& ctx) {
  Resolver r(ctx, "model");
  const auto manifest_path = r.path("manifest", o.manifest, ctx.ws.manifest());
  const auto tok_path = r.path("tokenizer", o.tokenizer, ctx.ws.tokenizer());
  const auto out = r.path("out", o.out, ctx.ws.train_dir());
  gjsa::ModelConfig mc;
  mc.layers = r("layers", o.layers, 4);
  mc.width = r("width", o.width, 128);
  mc.heads = r("heads", o.heads, 4);
  mc.mlp_ratio = r("mlp_ratio", o.mlp_ratio, 4);
  mc.sigma = r("sigma", o.sigma, mc.sigma);
  mc.geo_dims = r("geo_dims", o.geo_dims, 32);
  mc.geo_dropout = r("geo_dropout", o.geo_dropout, mc.geo_dropout);
  mc.cond_dropout = r("cond_dropout", o.cond_dropout, mc.cond_dropout);
  mc.d_sem = r("d_sem", o.d_sem, mc.d_sem);
  mc.seed = r("seed", o.seed, std::uint64_t{0});
  teacher::TeacherConfig tcfg;
  tcfg.hidden = r("teacher_hidden", o.teacher_hidden, tcfg.hidden);
  tcfg.d_sem = mc.d_sem;
  const auto teacher_seed = r("teacher_seed", o.teacher_seed, std::uint64_t{7});
  gjsa::TrainConfig tc;
  tc.steps = r("steps", o.steps, std::int64_t{2000});
  tc.batch = r("batch", o.batch, 16);
  tc.lr = r("lr", o.lr, 1e-3);
  tc.warmup = r("warmup", o.warmup, std::int64_t{100});
  tc.weight_decay = r("weight_decay", o.weight_decay, tc.weight_decay);
  tc.grad_clip = r("grad_clip", o.grad_clip, tc.grad_clip);
  tc.checkpoint_every = r("checkpoint_every", o.checkpoint_every, std::int64_t{500});
  tc.seed = mc.seed;
  tc.checkpoint_dir = out;
  tc.loss_csv = out / "loss.csv";
  const bool resume = r("resume", o.resume, false);

  gjsa::Checkpoint<float> c;
  const auto latest = out / "latest.emap";
  if (resume && std::filesystem::exists(latest)) {
    ctx.record->add_input(latest);
    c = gjsa::load_checkpoint<float>(latest);
    spdlog::info("resuming from {} at step {}; model and teacher settings come from the checkpoint",
                 latest.string(), c.step);
    ctx.effective["model"]["teacher_seed"] = c.teacher_seed;
    ctx.effective["model"]["teacher_hidden"] = c.teacher_config.hidden;
    ctx.effective["model"]["d_sem"] = c.teacher_config.d_sem;
    const auto& m = c.model.config();
    for (const auto& [k, v] : nlohmann::json{{"layers", m.layers}, {"width", m.width}, {"heads", m.heads},
                                             {"mlp_ratio", m.mlp_ratio}, {"sigma", m.sigma}, {"geo_dims", m.geo_dims},
                                             {"geo_dropout", m.geo_dropout}, {"cond_dropout", m.cond_dropout}}
                                   .items()) {
      ctx.effective["model"][k] = v;
    }
  } else {
    if (!std::filesystem::exists(tok_path)) {
      throw UsageError("no tokenizer at " + tok_path.string() + "; run train-tokenizer first or pass --tokenizer");
    }
    ctx.record->add_input(tok_path);
    c.tokenizer = gjsa::load_tokenizer(tok_path);
    mc.schedule = c.tokenizer.sched;
    mc.vocab = c.tokenizer.cb.K;
    mc.depth = c.tokenizer.depth;
    mc.latent_dim = c.tokenizer.cb.d;
    mc.validate();
    c.model = gjsa::GjsaModel<float>(mc);
    c.teacher_seed = teacher_seed;
    c.teacher_config = tcfg;
  }
  ctx.record->set_seed("model", c.model.config().seed);
  ctx.record->set_seed("teacher", c.teacher_seed);
  const teacher::TeacherNet teacher(c.teacher_seed, c.teacher_config);

  const auto m = open_manifest(manifest_path, ctx);
  const auto pairs = train_pairs(m, manifest_path.parent_path(), c.tokenizer.image_side(), 0);
  std::vector<gjsa::PairImages> refs;
  for (const auto& p : pairs) refs.push_back({&p.sat, &p.map, p.geo});
  spdlog::info("tokenizing {} train pairs", refs.size());
  const auto items = gjsa::prepare_items(refs, c.tokenizer, teacher);
  c.notes["train"] = gjsa::to_json(tc);
  c.notes["manifest_sha256"] = sha256_file(manifest_path);

  std::filesystem::create_directories(out);
  const std::int64_t every = std::max<std::int64_t>(1, tc.steps / 20);
  const auto log = gjsa::train(c, items, tc, teacher, [&](const gjsa::LossRecord& l) {
    if (l.step % every == 0 || l.step + 1 == tc.steps) {
      spdlog::info("step {} loss_joint {:.4f} loss_sem {:.4f}", l.step, l.joint, l.semantic);
    }
  });
  ctx.record->add_output(latest);
  ctx.record->add_output(tc.loss_csv);
  if (!log.empty()) {
    const auto& last = log.back();
    ctx.record->note("final", {{"step", last.step}, {"loss_joint", last.joint}, {"loss_sem", last.semantic}});
    ctx.record->note("ln_K", std::log(static_cast<double>(c.model.config().vocab)));
  }
}

CLI::App* add_generate(CLI::App& app, GenerateOptions& o) {
  auto* c = app.add_subcommand("generate", "Translate or complete one tile");
  c->add_option("--checkpoint", o.checkpoint, "Checkpoint (default <workspace>/train/latest.emap)");
  c->add_option("--mode", o.mode, "map2sat | sat2map | coord_only | inpaint | outpaint (default map2sat)");
  c->add_option("--cond", o.cond, "Condition image: the map for map2sat, the satellite tile for sat2map");
  c->add_option("--image", o.image, "Known image to complete (inpaint/outpaint)");
  c->add_option("--mask", o.mask, "PNG; nonzero pixels are regenerated (inpaint/outpaint)");
  c->add_option("--target", o.target, "Modality completed by inpaint/outpaint: sat | map (default sat)");
  c->add_option("--lat", o.lat, "Latitude of the tile centre");
  c->add_option("--lon", o.lon, "Longitude of the tile centre");
  c->add_option("--out", o.out, "Output directory (default <workspace>/generate)");
  add_sampling_flags(c, o.sampling);
  return c;
}

void run_generate(const GenerateOptions& o, Context& ctx) {
  Resolver r(ctx, "infer");
  const auto ckpt_path = require_checkpoint(r, o.checkpoint, ctx);
  const auto mode = infer::parse_mode(r("mode", o.mode, std::string("map2sat")));
  const auto cond = r.optional_path("cond", o.cond);
  const auto image = r.optional_path("image", o.image);
  const auto mask_path = r.optional_path("mask", o.mask);
  const auto target_name = r("target", o.target, std::string("sat"));
  if (target_name != "sat" && target_name != "map") throw ConfigError("target must be sat or map");
  const int target = target_name == "sat" ? gjsa::kSat : gjsa::kMap;
  const auto lat = r.optional("lat", o.lat), lon = r.optional("lon", o.lon);
  if (!lat || !lon) throw UsageError("generate needs --lat and --lon");
  const auto out = r.path("out", o.out, ctx.ws.generate_dir());
  const auto sampling = resolve_sampling(r, o.sampling);
  ctx.record->set_seed("sampler", sampling.sampler.seed);

  const auto c = gjsa::load_checkpoint<float>(ckpt_path);
  const int side = c.tokenizer.image_side();
  infer::GenerateRequest req;
  req.mode = mode;
  req.geo = geotile::make_geocoord(*lat, *lon);
  req.target = target;
  req.keypoints = sampling.keypoints;
  req.sampler = sampling.sampler;
  req.guidance = guidance_for(sampling, mode, target);
  switch (mode) {
    case infer::Mode::map2sat:
      if (!cond) throw UsageError("map2sat needs --cond <map.png>");
      req.map = read_input(*cond, side, ctx);
      break;
    case infer::Mode::sat2map:
      if (!cond) throw UsageError("sat2map needs --cond <sat.png>");
      req.sat = read_input(*cond, side, ctx);
      break;
    case infer::Mode::coord_only:
      if (cond || image) throw UsageError("coord_only takes no images");
      break;
    case infer::Mode::inpaint:
    case infer::Mode::outpaint: {
      if (!image) throw UsageError(infer::to_string(mode) + " needs --image");
      (target == gjsa::kSat ? req.sat : req.map) = read_input(*image, side, ctx);
      if (cond) (target == gjsa::kSat ? req.map : req.sat) = read_input(*cond, side, ctx);
      if (mask_path) {
        ctx.record->add_input(*mask_path);
        const RgbImage mk = read_png(*mask_path);
        if (mk.width != side || mk.height != side) {
          throw UsageError(fmt::format("mask is {}x{}, expected {}x{}", mk.width, mk.height, side, side));
        }
        req.mask.assign(static_cast<std::size_t>(side) * side, 0);
        for (std::size_t i = 0; i < req.mask.size(); ++i) {
          req.mask[i] = (mk.pixels[3 * i] | mk.pixels[3 * i + 1] | mk.pixels[3 * i + 2]) != 0;
        }
      } else if (mode == infer::Mode::inpaint) {
        throw UsageError("inpaint needs --mask");
      }
      break;
    }
  }

  const auto res = infer::generate(c.model, c.tokenizer, req);
  std::filesystem::create_directories(out);
  const auto stem = fmt::format("{}-seed{}", infer::to_string(mode), req.sampler.seed);
  std::vector<std::pair<std::string, const RgbImage*>> written;
  if (mode == infer::Mode::map2sat || mode == infer::Mode::coord_only || target == gjsa::kSat) {
    if (mode != infer::Mode::sat2map) written.emplace_back("sat", &res.sat);
  }
  if (mode == infer::Mode::sat2map || mode == infer::Mode::coord_only ||
      ((mode == infer::Mode::inpaint || mode == infer::Mode::outpaint) && target == gjsa::kMap)) {
    written.emplace_back("map", &res.map);
  }
  for (const auto& [name, img] : written) {
    const auto p = out / (stem + "-" + name + ".png");
    write_png(p, *img);
    ctx.record->add_output(p);
    print_hash(p);
  }
  const auto sidecar = out / (stem + ".json");
  const auto text = infer::sidecar_json(req, res, sha256_file(ckpt_path)).dump(2) + "\n";
  write_file_atomic(sidecar, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  ctx.record->add_output(sidecar);
}

CLI::App* add_eval(CLI::App& app, EvalOptions& o) {
  auto* c = app.add_subcommand("eval", "Score a checkpoint on a corpus split");
  c->add_option("--checkpoint", o.checkpoint, "Checkpoint (default <workspace>/train/latest.emap)");
  c->add_option("--manifest", o.manifest, "Corpus manifest (default <workspace>/corpus/manifest.ndjson)");
  c->add_option("--split", o.split, "train | val | test (default test)");
  c->add_option("--direction", o.direction, "map2sat | sat2map | both (default both)");
  c->add_option("--limit", o.limit, "Score only the first n pairs; 0 = all (default 0)");
  c->add_option("--out", o.out, "Report directory (default <workspace>/eval)");
  add_sampling_flags(c, o.sampling);
  return c;
}

void run_eval(const EvalOptions& o, Context& ctx) {
  Resolver r(ctx, "eval");
  const auto ckpt_path = require_checkpoint(r, o.checkpoint, ctx);
  const auto manifest_path = r.path("manifest", o.manifest, ctx.ws.manifest());
  metrics::EvalConfig ec;
  ec.split = geotile::parse_split(r("split", o.split, std::string("test")));
  const auto direction = r("direction", o.direction, std::string("both"));
  std::vector<infer::Mode> dirs;
  if (direction == "both") dirs = {infer::Mode::map2sat, infer::Mode::sat2map};
  else if (direction == "map2sat" || direction == "sat2map") dirs = {infer::parse_mode(direction)};
  else throw ConfigError("direction must be map2sat, sat2map or both");
  const int limit = r("limit", o.limit, 0);
  if (limit < 0) throw ConfigError("limit must be >= 0");
  ec.limit = static_cast<std::size_t>(limit);
  const auto out = r.path("out", o.out, ctx.ws.eval_dir());
  const auto sampling = resolve_sampling(r, o.sampling);
  ec.keypoints = sampling.keypoints;
  ec.sampler = sampling.sampler;
  ctx.record->set_seed("sampler", ec.sampler.seed);

  const auto c = gjsa::load_checkpoint<float>(ckpt_path);
  const auto m = open_manifest(manifest_path, ctx);
  std::filesystem::create_directories(out);
  for (const auto d : dirs) {
    ec.guidance = guidance_for(sampling, d, gjsa::kSat);
    const auto report = metrics::evaluate(m, manifest_path.parent_path(), c, d, ec);
    const auto path = out / (infer::to_string(d) + ".json");
    const auto text = metrics::to_json(report).dump(2) + "\n";
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    ctx.record->add_output(path);
    ctx.record->note(infer::to_string(d), metrics::to_json(report)["values"]);
    std::printf("%s\n", metrics::format_table(report).c_str());
  }
}

}  // namespace emap::cli
