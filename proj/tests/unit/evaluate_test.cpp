// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/rng.hpp"
#include "earthmapper/metrics/evaluate.hpp"
#include "earthmapper/synthdata/synth.hpp"
#include "support/temp_dir.hpp"

namespace emap::metrics {
namespace {

gjsa::Checkpoint<float> tiny_checkpoint() {
  gjsa::Checkpoint<float> c;
  auto& tok = c.tokenizer;
  tok.ae = hrq::Autoencoder({4, 8, 2}, 3);
  tok.cb = hrq::Codebook(16, 4);
  Rng rng(9);
  for (auto& v : tok.cb.vectors) v = rng.normal() * 0.3;
  tok.sched = hrq::ScaleSchedule{{{1, 1}, {2, 2}, {4, 4}}};
  tok.depth = 2;
  gjsa::ModelConfig mc;
  mc.layers = 1;
  mc.width = 16;
  mc.heads = 2;
  mc.schedule = tok.sched;
  mc.vocab = 16;
  mc.latent_dim = 4;
  mc.d_sem = 8;
  mc.geo_dims = 8;
  c.model = gjsa::GjsaModel<float>(mc);
  c.teacher_seed = 4;
  c.teacher_config = {8, 8, 4};
  return c;
}

class EvaluateTest : public ::testing::Test {
 protected:
  testing::TempDir dir;
  geotile::Manifest manifest;
  gjsa::Checkpoint<float> ckpt = tiny_checkpoint();

  void SetUp() override {
    synthdata::CorpusConfig cc;
    cc.n = 20;
    cc.seed = 2;
    cc.train = 0.5;
    cc.val = 0.0;
    cc.test = 0.5;
    cc.scene.size = 32;
    cc.scene.snap = 8;
    cc.scene.noise_base_cell = 8;
    manifest = synthdata::build_corpus(cc, dir.path());
  }
};

TEST_F(EvaluateTest, LoadSplitResizesToTheTokenizerSide) {
  const auto pairs = load_split(manifest, dir.path(), geotile::Split::test, 16);
  ASSERT_EQ(pairs.size(), manifest.count(geotile::Split::test));
  EXPECT_EQ(pairs[0].sat.width, 16);
  EXPECT_EQ(pairs[0].map.height, 16);
  EXPECT_EQ(load_split(manifest, dir.path(), geotile::Split::test, 16, 3).size(), 3u);
}

TEST_F(EvaluateTest, Sat2MapReportsPixelMetrics) {
  const auto r = evaluate(manifest, dir.path(), ckpt, infer::Mode::sat2map);
  EXPECT_EQ(r.direction, "sat2map");
  EXPECT_EQ(r.label, "teacher-feature");
  for (const char* k : {"ssim", "psnr", "rmse", "perceptual"}) EXPECT_TRUE(r.values.count(k)) << k;
  EXPECT_EQ(r.counts.at("pairs"), 10);
  EXPECT_EQ(report_from_json(to_json(r)), r);
  EXPECT_EQ(r.config["split"], "test");
}

TEST_F(EvaluateTest, Map2SatReportsDistributionMetrics) {
  const auto r = evaluate(manifest, dir.path(), ckpt, infer::Mode::map2sat);
  for (const char* k : {"fid", "kid", "precision", "recall"}) EXPECT_TRUE(r.values.count(k)) << k;
  EXPECT_GE(r.values.at("fid"), 0.0);
}

TEST_F(EvaluateTest, DeterministicAcrossRuns) {
  EXPECT_EQ(evaluate(manifest, dir.path(), ckpt, infer::Mode::sat2map),
            evaluate(manifest, dir.path(), ckpt, infer::Mode::sat2map));
}

TEST_F(EvaluateTest, EmptySplitAndBadDirectionRejected) {
  EvalConfig cfg;
  cfg.split = geotile::Split::val;
  EXPECT_THROW(evaluate(manifest, dir.path(), ckpt, infer::Mode::sat2map, cfg), UsageError);
  EXPECT_THROW(evaluate(manifest, dir.path(), ckpt, infer::Mode::inpaint), UsageError);
}

TEST(EvaluateTruth, GroundTruthAgainstItself) {
  std::vector<FloatImage> imgs;
  for (int i = 0; i < 6; ++i) {
    synthdata::SceneSpec s;
    s.seed = i;
    s.size = 32;
    s.snap = 8;
    s.noise_base_cell = 8;
    imgs.push_back(to_float(synthdata::generate_pair(s).map));
  }
  const teacher::TeacherNet t(1, {8, 8, 4});
  const auto px = score_pixels(imgs, imgs, t);
  EXPECT_EQ(px.values.at("ssim"), 1.0);
  EXPECT_EQ(px.values.at("rmse"), 0.0);
  const auto ds = score_distribution(imgs, imgs, t);
  EXPECT_LT(ds.values.at("fid"), 1e-6);
}

}  // namespace
}  // namespace emap::metrics
