// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "earthmapper/common/rng.hpp"
#include "earthmapper/gjsa/model.hpp"
#include "earthmapper/num/adamw.hpp"

namespace {

using namespace emap;
using namespace emap::gjsa;

struct Fixture {
  ModelConfig cfg;
  GjsaModel<float> model;
  std::vector<JointSequence> seqs;
  std::vector<SemanticTargets> sem;
  JointBatch batch;
  std::vector<const SemanticTargets*> targets;

  Fixture(int side, int width, int batch_size) {
    hrq::ScaleSchedule s;
    for (int k = 1; k <= side; k *= 2) s.scales.push_back({k, k});
    cfg.layers = 4;
    cfg.width = width;
    cfg.heads = 4;
    cfg.schedule = s;
    cfg.vocab = 512;
    cfg.latent_dim = 32;
    cfg.d_sem = 64;
    cfg.geo_dims = 32;
    model = GjsaModel<float>(cfg);
    Rng rng(3);
    std::vector<double> cbv(512 * 32);
    for (auto& v : cbv) v = rng.normal();
    const hrq::Codebook cb(512, 32, cbv);
    for (int b = 0; b < batch_size; ++b) {
      hrq::TokenMap tm;
      tm.depth = 2;
      for (int k = 0; k < s.count(); ++k) {
        std::vector<int> v(s.area(k) * 2);
        for (auto& x : v) x = static_cast<int>(rng.below(512));
        tm.scales.push_back(v);
      }
      seqs.push_back(build_joint_sequence(tm, tm, {30, 120}, cb, s));
      SemanticTargets st;
      for (int k = 0; k < s.count(); ++k) st.scales.emplace_back(2 * s.area(k) * 64, 0.1);
      sem.push_back(st);
    }
    std::vector<const JointSequence*> sp;
    for (int b = 0; b < batch_size; ++b) {
      sp.push_back(&seqs[b]);
      targets.push_back(&sem[b]);
    }
    batch = make_batch(sp, std::vector<Conditioning>(batch_size), cfg);
  }
};

void BM_ModelLogits(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)), 128, 2);
  for (auto _ : state) benchmark::DoNotOptimize(f.model.logits(f.batch));
  state.counters["seq"] = f.batch.length;
}
BENCHMARK(BM_ModelLogits)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)), 128, static_cast<int>(state.range(1)));
  num::AdamWState<float> opt;
  for (auto _ : state) {
    num::Graph<float> g;
    num::BoundParams<float> w(g, f.model.params());
    auto parts = total_loss(f.model, w, f.batch, f.targets);
    g.backward(parts.total);
    auto grads = w.grads();
    num::adamw_step<float>(f.model.params(), grads, {}, opt);
  }
  state.counters["seq"] = f.batch.length;
}
BENCHMARK(BM_TrainStep)->Args({4, 16})->Args({8, 8})->Unit(benchmark::kMillisecond);

}  // namespace
