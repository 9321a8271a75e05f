// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/rng.hpp"
#include "earthmapper/gjsa/archive.hpp"
#include "earthmapper/gjsa/model.hpp"
#include "earthmapper/gjsa/sequence.hpp"
#include "earthmapper/gjsa/train.hpp"
#include "earthmapper/synthdata/synth.hpp"
#include "earthmapper/teacher/teacher.hpp"
#include "support/temp_dir.hpp"

namespace emap::gjsa {
namespace {

using hrq::ScaleSchedule;
using hrq::TokenMap;

constexpr int kK = 16;
constexpr int kLatent = 4;
const teacher::TeacherConfig kTeacherCfg{8, 8, 4};

hrq::Tokenizer tiny_tokenizer(std::uint64_t seed) {
  hrq::Tokenizer tok;
  tok.ae = hrq::Autoencoder({kLatent, 8, 2}, seed);
  tok.cb = hrq::Codebook(kK, kLatent);
  Rng rng(seed + 1);
  for (auto& v : tok.cb.vectors) v = rng.normal() * 0.5;
  tok.sched = ScaleSchedule{{{1, 1}, {2, 2}, {4, 4}}};
  tok.depth = 2;
  return tok;
}

ModelConfig tiny_config(const hrq::Tokenizer& tok) {
  ModelConfig c;
  c.layers = 2;
  c.width = 32;
  c.heads = 4;
  c.mlp_ratio = 2;
  c.schedule = tok.sched;
  c.vocab = kK;
  c.depth = tok.depth;
  c.latent_dim = kLatent;
  c.d_sem = kTeacherCfg.d_sem;
  c.geo_dims = 8;
  c.seed = 3;
  return c;
}

struct Corpus {
  std::vector<synthdata::ScenePair> pairs;
  std::vector<TrainItem> items;
};

Corpus tiny_corpus(int n, const hrq::Tokenizer& tok, const teacher::TeacherNet& teacher) {
  Corpus c;
  for (int i = 0; i < n; ++i) {
    synthdata::SceneSpec spec;
    spec.seed = 100 + i;
    spec.size = 16;
    spec.snap = 4;
    spec.noise_base_cell = 4;
    c.pairs.push_back(synthdata::generate_pair(spec));
  }
  std::vector<PairImages> refs;
  for (const auto& p : c.pairs) refs.push_back({&p.sat, &p.map, p.geo});
  c.items = prepare_items(refs, tok, teacher);
  return c;
}

TokenMap random_tokens(const ScaleSchedule& s, int depth, Rng& rng) {
  TokenMap tm;
  tm.depth = depth;
  for (int k = 0; k < s.count(); ++k) {
    std::vector<int> v(static_cast<std::size_t>(s.area(k)) * depth);
    for (auto& x : v) x = static_cast<int>(rng.below(kK));
    tm.scales.push_back(std::move(v));
  }
  return tm;
}

template <class T>
std::vector<num::Tensor<T>> run_logits(const GjsaModel<T>& m, const std::vector<const JointSequence*>& seqs,
                                       std::vector<Conditioning> cond = {}) {
  if (cond.empty()) cond.resize(seqs.size());
  return m.logits(make_batch(seqs, cond, m.config()));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

TEST(SinEmbed, FirstPairUsesUnitFrequency) {
  const auto e = sin_embed(0.7, 8);
  ASSERT_EQ(e.size(), 8u);
  EXPECT_DOUBLE_EQ(e[0], std::sin(0.7));
  EXPECT_DOUBLE_EQ(e[1], std::cos(0.7));
}

TEST(SinEmbed, FrequenciesFollowTheGeometricLadder) {
  const int dims = 16;
  const double v = 31.25;
  const auto e = sin_embed(v, dims);
  for (int i = 0; i < dims / 2; ++i) {
    const double f = std::pow(10000.0, -2.0 * i / dims);
    EXPECT_NEAR(e[2 * i], std::sin(v * f), 1e-12) << i;
    EXPECT_NEAR(e[2 * i + 1], std::cos(v * f), 1e-12) << i;
  }
}

TEST(SinEmbed, EachPairHasUnitNorm) {
  const auto e = sin_embed(-121.5, 64);
  for (int i = 0; i < 32; ++i) EXPECT_NEAR(e[2 * i] * e[2 * i] + e[2 * i + 1] * e[2 * i + 1], 1.0, 1e-12);
}

TEST(SinEmbed, OddOrEmptyDimsRejected) {
  EXPECT_THROW(sin_embed(1.0, 7), ConfigError);
  EXPECT_THROW(sin_embed(1.0, 0), ConfigError);
  EXPECT_THROW(sin_embed(1.0, -2), ConfigError);
}

TEST(Layout, LengthCountsGeoAndBothModalities) {
  EXPECT_EQ(sequence_length(ScaleSchedule{{{1, 1}, {2, 2}, {4, 4}}}), 1 + 2 * 21);
  EXPECT_EQ(sequence_length(ScaleSchedule::standard()), 1 + 2 * ScaleSchedule::standard().total_positions());
}

TEST(Layout, SlotIndexAgreesWithLayout) {
  const ScaleSchedule s{{{1, 1}, {2, 2}, {3, 3}}};
  const auto slots = joint_layout(s);
  ASSERT_EQ(static_cast<int>(slots.size()), sequence_length(s));
  EXPECT_EQ(slots[0].scale, -1);
  for (int i = 1; i < static_cast<int>(slots.size()); ++i) {
    const auto& sl = slots[i];
    EXPECT_EQ(slot_index(s, sl.scale, sl.modality, sl.pos), i);
  }
  // within a scale the satellite block precedes the map block
  EXPECT_EQ(slots[slot_index(s, 2, kSat, 8)].modality, kSat);
  EXPECT_EQ(slot_index(s, 2, kMap, 0), slot_index(s, 2, kSat, 8) + 1);
}

TEST(Layout, PrefixIsALeadingSlice) {
  const ScaleSchedule s{{{1, 1}, {2, 2}, {4, 4}}};
  const auto full = joint_layout(s);
  for (int last = 0; last < s.count(); ++last) {
    const auto pre = joint_layout(s, last);
    ASSERT_LE(pre.size(), full.size());
    EXPECT_TRUE(std::equal(pre.begin(), pre.end(), full.begin()));
    EXPECT_EQ(pre.back().scale, last);
  }
}

TEST(Mask, ExhaustiveAgainstScaleRule) {
  const ScaleSchedule s{{{1, 1}, {2, 2}, {3, 3}}};
  const auto slots = joint_layout(s);
  const int n = static_cast<int>(slots.size());
  for (int q = 0; q < n; ++q) {
    for (int k = 0; k < n; ++k) {
      bool expected;
      if (slots[q].scale < 0) expected = k == 0;
      else expected = slots[k].scale <= slots[q].scale;
      ASSERT_EQ(attends(slots, q, k), expected) << q << "," << k;
    }
  }
}

TEST(Mask, UngroupedSlotsRejected) {
  auto slots = joint_layout(ScaleSchedule{{{1, 1}, {2, 2}}});
  std::swap(slots[1], slots.back());
  EXPECT_THROW(key_limits(slots), ShapeError);
}

TEST(Sequence, TargetsAreTheTokensAndInputsStartAtZero) {
  const auto tok = tiny_tokenizer(1);
  Rng rng(5);
  const auto sat = random_tokens(tok.sched, 2, rng);
  const auto map = random_tokens(tok.sched, 2, rng);
  const auto seq = build_joint_sequence(sat, map, {31.2, 121.4}, tok.cb, tok.sched);
  for (int j = 0; j < 2; ++j) EXPECT_EQ(seq.targets[j], -1);
  for (int k = 0; k < tok.sched.count(); ++k) {
    for (int p = 0; p < tok.sched.area(k); ++p) {
      for (int j = 0; j < 2; ++j) {
        EXPECT_EQ(seq.targets[slot_index(tok.sched, k, kSat, p) * 2 + j], sat.at(k, p, j));
        EXPECT_EQ(seq.targets[slot_index(tok.sched, k, kMap, p) * 2 + j], map.at(k, p, j));
      }
    }
  }
  for (int i = 0; i < 3 * kLatent; ++i) EXPECT_EQ(seq.inputs[i], 0.0);
}

TEST(Sequence, MismatchedTokenMapsRejected) {
  const auto tok = tiny_tokenizer(1);
  Rng rng(5);
  auto sat = random_tokens(tok.sched, 2, rng);
  const auto map = random_tokens(tok.sched, 2, rng);
  sat.scales.pop_back();
  EXPECT_THROW(build_joint_sequence(sat, map, {}, tok.cb, tok.sched), ShapeError);
}

TEST(Batch, MixedLayoutsRejected) {
  const auto tok = tiny_tokenizer(1);
  const auto cfg = tiny_config(tok);
  Rng rng(5);
  const auto a = random_tokens(tok.sched, 2, rng);
  const auto full = build_joint_sequence(a, a, {}, tok.cb, tok.sched);
  const auto pre = build_prefix(a, a, {}, tok.cb, tok.sched, 1);
  EXPECT_THROW(make_batch({&full, &pre}, {{}, {}}, cfg), ShapeError);
  EXPECT_THROW(make_batch({&full}, {{}, {}}, cfg), ShapeError);
}

class GjsaModelTest : public ::testing::Test {
 protected:
  hrq::Tokenizer tok = tiny_tokenizer(11);
  ModelConfig cfg = tiny_config(tok);
  Rng rng{17};

  JointSequence random_sequence(geotile::GeoCoord g = {31.2, 121.4}) {
    return build_joint_sequence(random_tokens(tok.sched, 2, rng), random_tokens(tok.sched, 2, rng), g, tok.cb,
                                tok.sched);
  }
};

TEST_F(GjsaModelTest, ConfigValidation) {
  auto bad = cfg;
  bad.heads = 5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.geo_dims = 7;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(model_config_from_json(to_json(cfg)), cfg);
}

TEST_F(GjsaModelTest, LogitShapesPerHead) {
  const GjsaModel<double> m(cfg);
  const auto seq = random_sequence();
  const auto out = run_logits(m, {&seq, &seq});
  ASSERT_EQ(out.size(), 2u);
  for (const auto& t : out) {
    EXPECT_EQ(t.dim(0), 2 * seq.length());
    EXPECT_EQ(t.dim(1), kK);
  }
}

TEST_F(GjsaModelTest, ScaleCausalityExhaustive) {
  // Changing tokens at scale k only alters slots at scales > k.
  const GjsaModel<double> m(cfg);
  const auto sat = random_tokens(tok.sched, 2, rng);
  const auto map = random_tokens(tok.sched, 2, rng);
  const auto base = build_joint_sequence(sat, map, {30.0, 120.0}, tok.cb, tok.sched);
  const auto ref = run_logits(m, {&base});
  for (int k = 0; k + 1 < tok.sched.count(); ++k) {
    for (int mod : {kSat, kMap}) {
      auto s2 = sat;
      auto m2 = map;
      auto& v = (mod == kSat ? s2 : m2).scales[k];
      for (auto& x : v) x = (x + 5) % kK;
      const auto alt = build_joint_sequence(s2, m2, {30.0, 120.0}, tok.cb, tok.sched);
      const auto out = run_logits(m, {&alt});
      bool later_changed = false;
      for (int i = 0; i < base.length(); ++i) {
        const bool may_change = base.slots[i].scale > k;
        for (int h = 0; h < 2; ++h) {
          for (int c = 0; c < kK; ++c) {
            const auto a = ref[h].data[i * kK + c];
            const auto b = out[h].data[i * kK + c];
            if (!may_change) ASSERT_EQ(a, b) << "slot " << i << " scale change " << k;
            else if (a != b) later_changed = true;
          }
        }
      }
      EXPECT_TRUE(later_changed);
    }
  }
}

TEST_F(GjsaModelTest, MapSlotsSeeSatelliteSlotsOfTheSameScale) {
  const GjsaModel<double> m(cfg);
  auto seq = random_sequence();
  const auto ref = run_logits(m, {&seq});
  const int k = 2;
  const int sat_slot = slot_index(tok.sched, k, kSat, 3);
  for (int c = 0; c < kLatent; ++c) seq.inputs[sat_slot * kLatent + c] += 1.0;
  const auto out = run_logits(m, {&seq});
  const int map_slot = slot_index(tok.sched, k, kMap, 0);
  bool changed = false;
  for (int c = 0; c < kK; ++c) changed |= ref[0].data[map_slot * kK + c] != out[0].data[map_slot * kK + c];
  EXPECT_TRUE(changed);
  const int coarse = slot_index(tok.sched, 1, kMap, 0);
  for (int c = 0; c < kK; ++c) EXPECT_EQ(ref[0].data[coarse * kK + c], out[0].data[coarse * kK + c]);
}

TEST_F(GjsaModelTest, GeoTokenConditionsEveryScale) {
  const GjsaModel<double> m(cfg);
  auto a = random_sequence({31.0, 121.0});
  auto b = a;
  b.geo = {31.5, 121.9};
  const auto la = run_logits(m, {&a});
  const auto lb = run_logits(m, {&b});
  EXPECT_NE(la[0].data[slot_index(tok.sched, 0, kSat, 0) * kK], lb[0].data[slot_index(tok.sched, 0, kSat, 0) * kK]);
  // with the null geo token the coordinate no longer matters
  const auto na = run_logits(m, {&a}, {{true, -1}});
  const auto nb = run_logits(m, {&b}, {{true, -1}});
  EXPECT_EQ(na[0].data, nb[0].data);
  EXPECT_EQ(na[1].data, nb[1].data);
}

TEST_F(GjsaModelTest, NullModalityHidesThatModalitysContent) {
  const GjsaModel<double> m(cfg);
  const auto sat = random_tokens(tok.sched, 2, rng);
  const auto map1 = random_tokens(tok.sched, 2, rng);
  const auto map2 = random_tokens(tok.sched, 2, rng);
  const auto a = build_joint_sequence(sat, map1, {31, 121}, tok.cb, tok.sched);
  const auto b = build_joint_sequence(sat, map2, {31, 121}, tok.cb, tok.sched);
  const auto la = run_logits(m, {&a}, {{false, kMap}});
  const auto lb = run_logits(m, {&b}, {{false, kMap}});
  EXPECT_EQ(la[0].data, lb[0].data);
  const auto fa = run_logits(m, {&a});
  const auto fb = run_logits(m, {&b});
  EXPECT_NE(fa[0].data, fb[0].data);
}

TEST_F(GjsaModelTest, BatchRowsAreIndependentAndOrderFree) {
  const GjsaModel<double> m(cfg);
  const auto a = random_sequence({30.9, 121.1});
  const auto b = random_sequence({31.4, 121.7});
  const auto ab = run_logits(m, {&a, &b});
  const auto ba = run_logits(m, {&b, &a});
  const auto only_a = run_logits(m, {&a});
  const std::size_t n = static_cast<std::size_t>(a.length()) * kK;
  for (int h = 0; h < 2; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(ab[h].data[i], only_a[h].data[i], 1e-12);
      EXPECT_NEAR(ab[h].data[i], ba[h].data[n + i], 1e-12);
    }
  }
}

TEST_F(GjsaModelTest, JointLossIsMeanCrossEntropyOverHeads) {
  const GjsaModel<double> m(cfg);
  const auto a = random_sequence();
  const auto b = random_sequence();
  const auto batch = make_batch({&a, &b}, {{}, {}}, cfg);
  num::Graph<double> g(false);
  num::BoundParams<double> w(g, m.params());
  const auto out = m.forward(w, batch);
  const double got = loss_joint<double>(out, batch).value().item();

  const auto lg = m.logits(batch);
  double sum = 0;
  int count = 0;
  double per_head[2] = {0, 0};
  for (int h = 0; h < 2; ++h) {
    double hs = 0;
    int hc = 0;
    for (int r = 0; r < batch.size * batch.length; ++r) {
      const int t = batch.targets[h][r];
      if (t < 0) continue;
      const double* row = lg[h].ptr() + static_cast<std::ptrdiff_t>(r) * kK;
      double mx = row[0];
      for (int c = 1; c < kK; ++c) mx = std::max(mx, row[c]);
      double z = 0;
      for (int c = 0; c < kK; ++c) z += std::exp(row[c] - mx);
      hs += mx + std::log(z) - row[t];
      ++hc;
    }
    per_head[h] = hs / hc;
    sum += hs;
    count += hc;
  }
  EXPECT_NEAR(got, (per_head[0] + per_head[1]) / 2, 1e-12);
  EXPECT_NEAR(got, sum / count, 1e-12);  // equal target counts per head
}

TEST_F(GjsaModelTest, TotalLossWeighsSemanticBySigma) {
  const teacher::TeacherNet teacher(5, kTeacherCfg);
  const auto corpus = tiny_corpus(2, tok, teacher);
  std::vector<const JointSequence*> seqs;
  std::vector<const SemanticTargets*> sem;
  for (const auto& it : corpus.items) {
    seqs.push_back(&it.sequence);
    sem.push_back(&it.semantic);
  }
  for (double sigma : {0.0, 0.5, 2.0}) {
    auto c = cfg;
    c.sigma = sigma;
    const GjsaModel<double> m(c);
    const auto batch = make_batch(seqs, {{}, {}}, c);
    num::Graph<double> g(false);
    num::BoundParams<double> w(g, m.params());
    const auto p = total_loss(m, w, batch, sem);
    EXPECT_GT(p.semantic.value().item(), 0.0);
    EXPECT_DOUBLE_EQ(p.total.value().item(), p.joint.value().item() + sigma * p.semantic.value().item());
  }
}

TEST_F(GjsaModelTest, SemanticTargetsMatchResizedTeacherFeatures) {
  const teacher::TeacherNet teacher(5, kTeacherCfg);
  Rng r(2);
  const auto sat = random_tokens(tok.sched, 2, r);
  const auto map = random_tokens(tok.sched, 2, r);
  const auto st = semantic_targets(sat, map, tok, teacher);
  ASSERT_EQ(st.scales.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    const auto f = teacher::resize(teacher.extract(tok.decode_partial_float(map, k)), tok.sched.height(k),
                                   tok.sched.width(k));
    const std::size_t n = f.data.size();
    ASSERT_EQ(st.scales[k].size(), 2 * n);
    EXPECT_TRUE(std::equal(f.data.begin(), f.data.end(), st.scales[k].begin() + static_cast<std::ptrdiff_t>(n)));
  }
}

TEST_F(GjsaModelTest, TotalLossGradientMatchesFiniteDifferences) {
  const teacher::TeacherNet teacher(5, kTeacherCfg);
  const auto corpus = tiny_corpus(2, tok, teacher);
  auto c = cfg;
  c.width = 16;
  c.heads = 2;
  GjsaModel<double> m(c);
  std::vector<const JointSequence*> seqs{&corpus.items[0].sequence, &corpus.items[1].sequence};
  std::vector<const SemanticTargets*> sem{&corpus.items[0].semantic, &corpus.items[1].semantic};
  const auto batch = make_batch(seqs, {{false, -1}, {true, kSat}}, c);
  auto eval = [&]() {
    num::Graph<double> g(false);
    num::BoundParams<double> w(g, m.params());
    return total_loss(m, w, batch, sem).total.value().item();
  };
  std::vector<num::Tensor<double>> grads;
  {
    num::Graph<double> g;
    num::BoundParams<double> w(g, m.params());
    const auto p = total_loss(m, w, batch, sem);
    g.backward(p.total);
    grads = w.grads();
  }
  auto& ps = m.params();
  const double h = 1e-5;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& t = ps.at(i);
    double diff = 0, na = 0, nn = 0;
    const std::size_t stride = std::max<std::size_t>(1, t.data.size() / 6);
    for (std::size_t j = 0; j < t.data.size(); j += stride) {
      const double orig = t.data[j];
      t.data[j] = orig + h;
      const double up = eval();
      t.data[j] = orig - h;
      const double down = eval();
      t.data[j] = orig;
      const double num = (up - down) / (2 * h);
      const double an = grads[i].data[j];
      diff += (an - num) * (an - num);
      na += an * an;
      nn += num * num;
    }
    const double denom = std::sqrt(na) + std::sqrt(nn);
    if (denom > 1e-10) EXPECT_LT(std::sqrt(diff) / denom, 1e-5) << ps.name(i);
  }
}

class GjsaTrainTest : public ::testing::Test {
 protected:
  hrq::Tokenizer tok = tiny_tokenizer(21);
  teacher::TeacherNet teacher{9, kTeacherCfg};

  template <class T>
  Checkpoint<T> fresh(ModelConfig mc) {
    Checkpoint<T> c;
    c.model = GjsaModel<T>(mc);
    c.tokenizer = tok;
    c.teacher_seed = teacher.seed();
    c.teacher_config = teacher.config();
    return c;
  }
};

TEST_F(GjsaTrainTest, CheckpointRoundTripIsByteIdentical) {
  const testing::TempDir dir;
  const auto corpus = tiny_corpus(4, tok, teacher);
  auto c = fresh<float>(tiny_config(tok));
  TrainConfig tc;
  tc.steps = 3;
  tc.batch = 2;
  train(c, corpus.items, tc, teacher);
  save_checkpoint(dir.path() / "a.emap", c);
  const auto back = load_checkpoint<float>(dir.path() / "a.emap");
  save_checkpoint(dir.path() / "b.emap", back);
  EXPECT_EQ(slurp(dir.path() / "a.emap"), slurp(dir.path() / "b.emap"));
  EXPECT_EQ(back.step, 3);
  EXPECT_EQ(back.optimizer.step, c.optimizer.step);
  EXPECT_EQ(back.model.config(), c.model.config());
  EXPECT_EQ(back.tokenizer.cb.vectors, tok.cb.vectors);
  const auto& seq = corpus.items[0].sequence;
  EXPECT_EQ(run_logits(back.model, {&seq})[1].data, run_logits(c.model, {&seq})[1].data);
  EXPECT_EQ(back.tokenizer.encode(corpus.pairs[0].sat), corpus.items[0].sat);
}

TEST_F(GjsaTrainTest, TokenizerArchiveRoundTrip) {
  const testing::TempDir dir;
  save_tokenizer(dir.path() / "t.emap", tok);
  const auto back = load_tokenizer(dir.path() / "t.emap");
  EXPECT_EQ(back.cb.vectors, tok.cb.vectors);
  EXPECT_EQ(back.sched, tok.sched);
  const auto corpus = tiny_corpus(1, tok, teacher);
  EXPECT_EQ(back.encode(corpus.pairs[0].map), corpus.items[0].map);
  save_checkpoint(dir.path() / "c.emap", fresh<float>(tiny_config(tok)));
  EXPECT_THROW(load_tokenizer(dir.path() / "c.emap"), IntegrityError);
}

TEST_F(GjsaTrainTest, CorruptCheckpointsAreRejected) {
  const testing::TempDir dir;
  const auto p = dir.path() / "c.emap";
  save_checkpoint(p, fresh<float>(tiny_config(tok)));
  const auto good = slurp(p);

  auto bad = good;
  bad[0] ^= 0x01;
  spit(p, bad);
  EXPECT_THROW(load_checkpoint<float>(p), IntegrityError);

  bad = good;
  bad[good.size() / 2] ^= 0x40;
  spit(p, bad);
  EXPECT_THROW(load_checkpoint<float>(p), IntegrityError);

  spit(p, good.substr(0, good.size() - 40));
  EXPECT_THROW(load_checkpoint<float>(p), IntegrityError);

  bad = good;
  bad[4] = static_cast<char>(kArchiveVersion + 1);
  spit(p, bad);
  EXPECT_THROW(load_checkpoint<float>(p), VersionError);
}

TEST_F(GjsaTrainTest, OverfitsEightSamples) {
  const auto corpus = tiny_corpus(8, tok, teacher);
  auto mc = tiny_config(tok);
  mc.width = 64;
  mc.geo_dropout = 0;
  mc.cond_dropout = 0;
  auto c = fresh<float>(mc);
  TrainConfig tc;
  tc.steps = 600;
  tc.batch = 8;
  tc.lr = 5e-3;
  tc.warmup = 20;
  tc.weight_decay = 0;
  train(c, corpus.items, tc, teacher);

  std::vector<const JointSequence*> seqs;
  for (const auto& it : corpus.items) seqs.push_back(&it.sequence);
  const auto batch = make_batch(seqs, std::vector<Conditioning>(8), mc);
  num::Graph<float> g(false);
  num::BoundParams<float> w(g, c.model.params());
  const double lj = loss_joint<float>(c.model.forward(w, batch), batch).value().item();
  EXPECT_LT(lj, 0.05);
}

TEST_F(GjsaTrainTest, ResumeIsBitExactInDoublePrecision) {
  const testing::TempDir dir;
  const auto corpus = tiny_corpus(4, tok, teacher);
  const auto mc = tiny_config(tok);
  TrainConfig tc;
  tc.steps = 8;
  tc.batch = 3;
  tc.lr = 1e-3;
  tc.warmup = 2;

  auto straight = fresh<double>(mc);
  tc.loss_csv = dir.path() / "straight.csv";
  const auto full = train(straight, corpus.items, tc, teacher);

  // the first run leaves a step-4 checkpoint behind; resume from it
  auto first = fresh<double>(mc);
  tc.loss_csv = dir.path() / "resumed.csv";
  tc.checkpoint_dir = dir.path() / "ckpt";
  tc.checkpoint_every = 4;
  train(first, corpus.items, tc, teacher);
  auto resumed = load_checkpoint<double>(tc.checkpoint_dir / "step_000004.emap");
  ASSERT_EQ(resumed.step, 4);
  std::filesystem::resize_file(tc.loss_csv, slurp(dir.path() / "straight.csv").find("\n4,") + 1);
  const auto tail = train(resumed, corpus.items, tc, teacher);

  ASSERT_EQ(tail.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(tail[i].total, full[4 + i].total);
  for (std::size_t i = 0; i < straight.model.params().size(); ++i) {
    EXPECT_EQ(straight.model.params().at(i).data, resumed.model.params().at(i).data) << i;
    EXPECT_EQ(straight.optimizer.m[i].data, resumed.optimizer.m[i].data);
  }
  EXPECT_EQ(slurp(dir.path() / "straight.csv"), slurp(dir.path() / "resumed.csv"));
}

TEST_F(GjsaTrainTest, LossCsvHasOneRowPerStep) {
  const testing::TempDir dir;
  const auto corpus = tiny_corpus(2, tok, teacher);
  auto c = fresh<float>(tiny_config(tok));
  TrainConfig tc;
  tc.steps = 5;
  tc.batch = 2;
  tc.loss_csv = dir.path() / "loss.csv";
  tc.checkpoint_dir = dir.path() / "ckpt";
  tc.checkpoint_every = 2;
  train(c, corpus.items, tc, teacher);
  std::ifstream in(tc.loss_csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,loss_joint,loss_sem,total");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
  EXPECT_TRUE(std::filesystem::exists(tc.checkpoint_dir / "step_000002.emap"));
  EXPECT_TRUE(std::filesystem::exists(tc.checkpoint_dir / "step_000004.emap"));
  EXPECT_EQ(load_checkpoint<float>(tc.checkpoint_dir / "latest.emap").step, 5);
}

TEST_F(GjsaTrainTest, DivergenceSavesLastGoodAndThrows) {
  const testing::TempDir dir;
  const auto corpus = tiny_corpus(2, tok, teacher);
  auto c = fresh<float>(tiny_config(tok));
  c.model.params().at(c.model.params().index_of("lnf.g")).data[0] = std::numeric_limits<float>::quiet_NaN();
  TrainConfig tc;
  tc.steps = 3;
  tc.batch = 2;
  tc.checkpoint_dir = dir.path();
  EXPECT_THROW(train(c, corpus.items, tc, teacher), TrainingError);
  EXPECT_EQ(c.step, 0);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "last_good.emap"));
}

TEST_F(GjsaTrainTest, TeacherMismatchRejected) {
  const auto corpus = tiny_corpus(2, tok, teacher);
  auto c = fresh<float>(tiny_config(tok));
  c.teacher_seed = teacher.seed() + 1;
  TrainConfig tc;
  tc.steps = 1;
  EXPECT_THROW(train(c, corpus.items, tc, teacher), ConfigError);
  EXPECT_THROW(train(c, {}, tc, teacher), UsageError);
}

}  // namespace
}  // namespace emap::gjsa
