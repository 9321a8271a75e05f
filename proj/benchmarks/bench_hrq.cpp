// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "earthmapper/common/rng.hpp"
#include "earthmapper/hrq/codebook.hpp"
#include "earthmapper/hrq/multiscale.hpp"

namespace {

using namespace emap;

hrq::Codebook random_codebook(int K, int d) {
  Rng rng(1);
  std::vector<double> v(static_cast<std::size_t>(K) * d);
  for (auto& x : v) x = rng.normal();
  return hrq::Codebook(K, d, std::move(v));
}

void BM_QuantizeVector(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0)), depth = static_cast<int>(state.range(1)), d = 32;
  const auto cb = random_codebook(K, d);
  Rng rng(2);
  std::vector<double> z(d);
  for (auto& x : z) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(hrq::quantize_vector(z, cb, depth));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_QuantizeVector)->Args({512, 1})->Args({512, 2})->Args({512, 4})->Args({4096, 2});

void BM_EncodeMultiscale(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0)), d = 32;
  const auto cb = random_codebook(512, d);
  hrq::ScaleSchedule sched;
  for (int s = 1; s <= side; s *= 2) sched.scales.push_back({s, s});
  hrq::LatentGrid g(side, side, d);
  Rng rng(3);
  for (auto& x : g.data) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(hrq::encode_multiscale(g, cb, sched, 2));
}
BENCHMARK(BM_EncodeMultiscale)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
