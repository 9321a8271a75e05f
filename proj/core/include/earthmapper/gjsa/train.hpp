// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "earthmapper/gjsa/archive.hpp"
#include "earthmapper/gjsa/model.hpp"
#include "earthmapper/hrq/tokenizer.hpp"
#include "earthmapper/num/adamw.hpp"
#include "earthmapper/teacher/teacher.hpp"

namespace emap::gjsa {

/// Everything needed to resume training or to generate.
template <class T>
struct Checkpoint {
  GjsaModel<T> model;
  num::AdamWState<T> optimizer;
  std::int64_t step = 0;
  hrq::Tokenizer tokenizer;
  std::uint64_t teacher_seed = 0;
  teacher::TeacherConfig teacher_config;
  /// Free-form provenance (training config echo, corpus hash...).
  nlohmann::json notes = nlohmann::json::object();
};

/// Tokenizer entries (autoencoder, codebook, schedule) inside an archive.
void put_tokenizer(Archive& a, const hrq::Tokenizer& tok);
hrq::Tokenizer get_tokenizer(const Archive& a);
void save_tokenizer(const std::filesystem::path& path, const hrq::Tokenizer& tok);
hrq::Tokenizer load_tokenizer(const std::filesystem::path& path);

/// Weights are stored as f32 for Checkpoint<float> and f64 for
/// Checkpoint<double>; the autoencoder is always f32, the codebook f64.
template <class T>
Archive to_archive(const Checkpoint<T>& c);
template <class T>
Checkpoint<T> from_archive(const Archive& a);

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& c) {
  to_archive(c).save(path);
}
template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  return from_archive<T>(Archive::load(path));
}

/// A tokenized training pair with everything the loss needs precomputed.
struct TrainItem {
  hrq::TokenMap sat;
  hrq::TokenMap map;
  geotile::GeoCoord geo;
  JointSequence sequence;
  SemanticTargets semantic;
};

/// Teacher features of the scale-k partial reconstructions, per modality,
/// resized to each scale's grid.
SemanticTargets semantic_targets(const hrq::TokenMap& sat, const hrq::TokenMap& map, const hrq::Tokenizer& tok,
                                 const teacher::TeacherNet& teacher);

struct PairImages {
  const RgbImage* sat = nullptr;
  const RgbImage* map = nullptr;
  geotile::GeoCoord geo;
};

std::vector<TrainItem> prepare_items(const std::vector<PairImages>& pairs, const hrq::Tokenizer& tok,
                                     const teacher::TeacherNet& teacher);

struct TrainConfig {
  std::int64_t steps = 2000;  // total, including steps already in the checkpoint
  int batch = 8;
  double lr = 3e-4;
  std::int64_t warmup = 100;
  double weight_decay = 0.01;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
  std::int64_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  std::filesystem::path loss_csv;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const TrainConfig& c);

struct LossRecord {
  std::int64_t step = 0;
  double joint = 0.0;
  double semantic = 0.0;
  double total = 0.0;
};

using TrainCallback = std::function<void(const LossRecord&)>;

/// Runs steps [c.step, cfg.steps). Step s draws its batch and condition
/// dropout from Rng::derive(cfg.seed, s), so resuming from a checkpoint
/// replays the same trajectory. On a non-finite loss or gradient the
/// parameters are left at the last good step, saved as last_good.emap when a
/// checkpoint directory is configured, and TrainingError is rethrown.
template <class T>
std::vector<LossRecord> train(Checkpoint<T>& c, const std::vector<TrainItem>& items, const TrainConfig& cfg,
                              const teacher::TeacherNet& teacher, const TrainCallback& on_step = {});

}  // namespace emap::gjsa
