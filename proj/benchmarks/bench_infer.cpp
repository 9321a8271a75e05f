// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "earthmapper/common/rng.hpp"
#include "earthmapper/infer/ops.hpp"

namespace {

using namespace emap;

std::vector<double> random_logits(int K) {
  Rng rng(5);
  std::vector<double> l(K);
  for (auto& x : l) x = 3 * rng.normal();
  return l;
}

void BM_TopKTopPSample(benchmark::State& state) {
  const auto logits = random_logits(static_cast<int>(state.range(0)));
  infer::SamplerConfig cfg;
  Rng rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(infer::top_k_top_p_sample(logits, cfg, rng));
}
BENCHMARK(BM_TopKTopPSample)->Arg(512)->Arg(4096);

void BM_CfgBlend(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  num::Tensor<float> u({n, 512}), c({n, 512});
  Rng rng(7);
  for (auto& x : u.data) x = static_cast<float>(rng.normal());
  for (auto& x : c.data) x = static_cast<float>(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(infer::cfg_blend(u, c, 2.5));
}
BENCHMARK(BM_CfgBlend)->Arg(16)->Arg(256);

void BM_Complexity(benchmark::State& state) {
  Rng rng(8);
  std::vector<int> t(static_cast<std::size_t>(state.range(0)));
  for (auto& x : t) x = static_cast<int>(rng.below(512));
  for (auto _ : state) benchmark::DoNotOptimize(infer::complexity(t));
}
BENCHMARK(BM_Complexity)->Arg(16)->Arg(256);

void BM_Kpf(benchmark::State& state) {
  Rng rng(9);
  const int n = 256, K = 512;
  std::vector<int> g(n), c(n);
  for (auto& x : g) x = static_cast<int>(rng.below(K));
  for (auto& x : c) x = static_cast<int>(rng.below(K));
  for (auto _ : state) {
    const auto keys = infer::select_keypoints(infer::normalize_indices(c, K), 0.95);
    benchmark::DoNotOptimize(infer::apply_kpf(g, c, keys, K));
  }
}
BENCHMARK(BM_Kpf);

}  // namespace
