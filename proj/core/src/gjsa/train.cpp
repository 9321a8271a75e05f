// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/gjsa/train.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/parallel.hpp"
#include "earthmapper/common/rng.hpp"

namespace emap::gjsa {

namespace {

template <class T>
constexpr const char* precision_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace

void put_tokenizer(Archive& a, const hrq::Tokenizer& tok) {
  a.meta["tokenizer"] = tok.describe();
  const auto& ae = tok.ae.params();
  for (std::size_t i = 0; i < ae.size(); ++i) a.put("ae/" + ae.name(i), ae.at(i));
  a.put("tok/codebook", num::Tensor<double>({tok.cb.K, tok.cb.d}, tok.cb.vectors));
  a.put_i64("tok/usage", tok.cb.usage_counts);
  a.put_i64("tok/duplicates", std::vector<std::int64_t>(tok.cb.duplicates.begin(), tok.cb.duplicates.end()));
}

hrq::Tokenizer get_tokenizer(const Archive& a) {
  try {
    hrq::Tokenizer tok;
    const auto& tj = a.meta.at("tokenizer");
    hrq::AutoencoderConfig aec{tj.at("latent_dim"), tj.at("hidden"), tj.at("patch")};
    tok.ae = hrq::Autoencoder(aec, 0);
    auto& ae = tok.ae.params();
    for (std::size_t i = 0; i < ae.size(); ++i) {
      auto t = a.get<float>("ae/" + ae.name(i));
      if (t.shape != ae.at(i).shape) throw IntegrityError("archive entry 'ae/" + ae.name(i) + "' has the wrong shape");
      ae.at(i) = std::move(t);
    }
    const auto cb = a.get<double>("tok/codebook");
    if (cb.rank() != 2) throw IntegrityError("archive codebook is not a matrix");
    tok.cb = hrq::Codebook(static_cast<int>(cb.dim(0)), static_cast<int>(cb.dim(1)),
                           std::vector<double>(cb.data.begin(), cb.data.end()));
    tok.cb.usage_counts = a.get_i64("tok/usage");
    for (auto d : a.get_i64("tok/duplicates")) tok.cb.duplicates.push_back(static_cast<int>(d));
    tok.depth = tj.at("depth");
    for (const auto& s : tj.at("schedule")) tok.sched.scales.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
    tok.sched.validate();
    return tok;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("tokenizer metadata: ") + e.what());
  } catch (const ShapeError& e) {
    throw IntegrityError(std::string("tokenizer metadata: ") + e.what());
  }
}

void save_tokenizer(const std::filesystem::path& path, const hrq::Tokenizer& tok) {
  Archive a;
  a.meta["kind"] = "earthmapper-tokenizer";
  put_tokenizer(a, tok);
  a.save(path);
}

hrq::Tokenizer load_tokenizer(const std::filesystem::path& path) {
  const auto a = Archive::load(path);
  if (a.meta.value("kind", "") != "earthmapper-tokenizer") throw IntegrityError(path.string() + " is not a tokenizer");
  return get_tokenizer(a);
}

template <class T>
Archive to_archive(const Checkpoint<T>& c) {
  Archive a;
  const auto& tok = c.tokenizer;
  a.meta["kind"] = "earthmapper-checkpoint";
  a.meta["precision"] = precision_name<T>();
  a.meta["model"] = to_json(c.model.config());
  a.meta["teacher"] = {{"seed", c.teacher_seed},
                       {"hidden", c.teacher_config.hidden},
                       {"d_sem", c.teacher_config.d_sem},
                       {"patch", c.teacher_config.patch}};
  a.meta["step"] = c.step;
  a.meta["optimizer_step"] = c.optimizer.step;
  a.meta["notes"] = c.notes;

  const auto& ps = c.model.params();
  for (std::size_t i = 0; i < ps.size(); ++i) a.put("model/" + ps.name(i), ps.at(i));
  if (!c.optimizer.m.empty()) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      a.put("adam.m/" + ps.name(i), c.optimizer.m[i]);
      a.put("adam.v/" + ps.name(i), c.optimizer.v[i]);
    }
  }
  put_tokenizer(a, tok);
  return a;
}

template <class T>
Checkpoint<T> from_archive(const Archive& a) {
  try {
    if (a.meta.at("kind") != "earthmapper-checkpoint") throw IntegrityError("archive is not a model checkpoint");
    Checkpoint<T> c;
    c.model = GjsaModel<T>(model_config_from_json(a.meta.at("model")));
    auto& ps = c.model.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto t = a.get<T>("model/" + ps.name(i));
      if (t.shape != ps.at(i).shape) throw IntegrityError("checkpoint entry 'model/" + ps.name(i) + "' has the wrong shape");
      ps.at(i) = std::move(t);
    }
    if (a.contains("adam.m/" + ps.name(0))) {
      for (std::size_t i = 0; i < ps.size(); ++i) {
        c.optimizer.m.push_back(a.get<T>("adam.m/" + ps.name(i)));
        c.optimizer.v.push_back(a.get<T>("adam.v/" + ps.name(i)));
      }
    }
    c.optimizer.step = a.meta.at("optimizer_step");
    c.step = a.meta.at("step");
    c.notes = a.meta.at("notes");

    c.tokenizer = get_tokenizer(a);

    const auto& te = a.meta.at("teacher");
    c.teacher_seed = te.at("seed");
    c.teacher_config = {te.at("hidden"), te.at("d_sem"), te.at("patch")};

    const auto& mc = c.model.config();
    if (mc.schedule != c.tokenizer.sched || mc.vocab != c.tokenizer.cb.K || mc.depth != c.tokenizer.depth ||
        mc.latent_dim != c.tokenizer.cb.d) {
      throw IntegrityError("checkpoint model and tokenizer disagree on schedule, vocabulary or depth");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint metadata: ") + e.what());
  }
}

SemanticTargets semantic_targets(const hrq::TokenMap& sat, const hrq::TokenMap& map, const hrq::Tokenizer& tok,
                                 const teacher::TeacherNet& teacher) {
  SemanticTargets out;
  const auto& sched = tok.sched;
  for (int k = 0; k < sched.count(); ++k) {
    std::vector<double> rows;
    for (const auto* tm : {&sat, &map}) {
      const auto f = teacher.extract(tok.decode_partial_float(*tm, k));
      const auto r = teacher::resize(f, sched.height(k), sched.width(k));
      rows.insert(rows.end(), r.data.begin(), r.data.end());
    }
    out.scales.push_back(std::move(rows));
  }
  return out;
}

std::vector<TrainItem> prepare_items(const std::vector<PairImages>& pairs, const hrq::Tokenizer& tok,
                                     const teacher::TeacherNet& teacher) {
  std::vector<TrainItem> items(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    auto& it = items[i];
    it.sat = tok.encode(*pairs[i].sat);
    it.map = tok.encode(*pairs[i].map);
    it.geo = pairs[i].geo;
    it.sequence = build_joint_sequence(it.sat, it.map, it.geo, tok.cb, tok.sched);
    it.semantic = semantic_targets(it.sat, it.map, tok, teacher);
  });
  return items;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"batch", c.batch},
          {"lr", c.lr},
          {"warmup", c.warmup},
          {"weight_decay", c.weight_decay},
          {"grad_clip", c.grad_clip},
          {"checkpoint_every", c.checkpoint_every},
          {"seed", c.seed}};
}

template <class T>
std::vector<LossRecord> train(Checkpoint<T>& c, const std::vector<TrainItem>& items, const TrainConfig& cfg,
                              const teacher::TeacherNet& teacher, const TrainCallback& on_step) {
  if (items.empty()) throw UsageError("train: no training items");
  if (cfg.batch < 1) throw ConfigError("train: batch must be positive");
  if (teacher.seed() != c.teacher_seed) throw ConfigError("train: teacher seed differs from the checkpoint's");
  const auto teacher_sum = teacher.checksum();
  const auto& mc = c.model.config();

  std::ofstream csv;
  if (!cfg.loss_csv.empty()) {
    if (cfg.loss_csv.has_parent_path()) std::filesystem::create_directories(cfg.loss_csv.parent_path());
    const bool fresh = c.step == 0 || !std::filesystem::exists(cfg.loss_csv);
    csv.open(cfg.loss_csv, fresh ? std::ios::trunc : std::ios::app);
    if (!csv) throw IoError("cannot write " + cfg.loss_csv.string());
    if (fresh) csv << "step,loss_joint,loss_sem,total\n";
  }
  auto save_as = [&](const std::string& name) {
    if (cfg.checkpoint_dir.empty()) return;
    save_checkpoint(cfg.checkpoint_dir / name, c);
  };

  const num::AdamWConfig base{.lr = cfg.lr, .weight_decay = cfg.weight_decay};
  std::vector<LossRecord> trace;
  for (std::int64_t s = c.step; s < cfg.steps; ++s) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(s)));
    std::vector<const JointSequence*> seqs;
    std::vector<const SemanticTargets*> sem;
    std::vector<Conditioning> cond;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto& it = items[rng.below(items.size())];
      seqs.push_back(&it.sequence);
      sem.push_back(&it.semantic);
      Conditioning cd;
      cd.null_geo = rng.uniform() < mc.geo_dropout;
      if (rng.uniform() < mc.cond_dropout) cd.null_modality = static_cast<int>(rng.below(2));
      cond.push_back(cd);
    }
    const auto batch = make_batch(seqs, cond, mc);
    try {
      num::Graph<T> g;
      num::BoundParams<T> w(g, c.model.params());
      const auto parts = total_loss(c.model, w, batch, sem);
      const double total = parts.total.value().item();
      if (!std::isfinite(total)) throw TrainingError("loss diverged at step " + std::to_string(s));
      g.backward(parts.total);
      auto grads = w.grads();
      if (cfg.grad_clip > 0) {
        double sq = 0.0;
        for (const auto& t : grads)
          for (T v : t.data) sq += static_cast<double>(v) * v;
        const double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) {
          const T f = static_cast<T>(cfg.grad_clip / norm);
          for (auto& t : grads)
            for (auto& v : t.data) v *= f;
        }
      }
      auto opt = base;
      opt.lr = num::warmup_cosine(s, cfg.steps, cfg.lr, cfg.warmup);
      num::adamw_step<T>(c.model.params(), grads, opt, c.optimizer);
      c.step = s + 1;
      const LossRecord rec{s, parts.joint.value().item(), parts.semantic.value().item(), total};
      trace.push_back(rec);
      if (csv) csv << fmt::format("{},{},{},{}\n", rec.step, rec.joint, rec.semantic, rec.total);
      if (on_step) on_step(rec);
    } catch (const TrainingError& e) {
      spdlog::error("training stopped at step {}: {}", s, e.what());
      if (csv) csv.flush();
      save_as("last_good.emap");
      throw;
    }
    if (cfg.checkpoint_every > 0 && c.step % cfg.checkpoint_every == 0) {
      save_as(fmt::format("step_{:06d}.emap", c.step));
      save_as("latest.emap");
    }
  }
  if (teacher.checksum() != teacher_sum) throw ContractError("teacher weights changed during training");
  save_as("latest.emap");
  return trace;
}

#define EMAP_INSTANTIATE_TRAIN(T)                                                                              \
  template Archive to_archive<T>(const Checkpoint<T>&);                                                        \
  template Checkpoint<T> from_archive<T>(const Archive&);                                                      \
  template std::vector<LossRecord> train<T>(Checkpoint<T>&, const std::vector<TrainItem>&, const TrainConfig&, \
                                            const teacher::TeacherNet&, const TrainCallback&);

EMAP_INSTANTIATE_TRAIN(float)
EMAP_INSTANTIATE_TRAIN(double)

}  // namespace emap::gjsa
