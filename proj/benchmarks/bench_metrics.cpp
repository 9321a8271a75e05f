// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "earthmapper/common/rng.hpp"
#include "earthmapper/metrics/features.hpp"
#include "earthmapper/metrics/pixel.hpp"

namespace {

using namespace emap;

FloatImage noise_image(int side, std::uint64_t seed) {
  Rng rng(seed);
  FloatImage img(side, side);
  for (auto& v : img.data) v = rng.uniform();
  return img;
}

void BM_Ssim(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto a = noise_image(side, 1), b = noise_image(side, 2);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

metrics::FeatureSet random_features(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  metrics::FeatureSet f(n);
  for (auto& r : f) {
    r.resize(d);
    for (auto& x : r) x = rng.normal();
  }
  return f;
}

void BM_FeatureFrechet(benchmark::State& state) {
  const auto a = random_features(200, static_cast<int>(state.range(0)), 1);
  const auto b = random_features(200, static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::feature_frechet(a, b));
}
BENCHMARK(BM_FeatureFrechet)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_KernelMmd(benchmark::State& state) {
  const auto a = random_features(200, 128, 1), b = random_features(200, 128, 2);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::kernel_mmd(a, b));
}
BENCHMARK(BM_KernelMmd)->Unit(benchmark::kMillisecond);

}  // namespace
