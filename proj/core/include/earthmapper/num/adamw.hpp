// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "earthmapper/num/params.hpp"

namespace emap::num {

struct AdamWConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

template <class T>
struct AdamWState {
  std::int64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

/// One decoupled-weight-decay Adam update:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
/// Weight decay is skipped for parameters registered with decay=false.
/// Throws TrainingError naming the first parameter with a non-finite
/// gradient, before any parameter is modified.
template <class T>
void adamw_step(ParamSet<T>& params, std::span<const Tensor<T>> grads, const AdamWConfig& cfg, AdamWState<T>& state);

/// Linear warmup to `peak`, then cosine decay to `floor_frac * peak` at `total`.
inline double warmup_cosine(std::int64_t step, std::int64_t total, double peak, std::int64_t warmup,
                            double floor_frac = 0.1) {
  if (warmup > 0 && step < warmup) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total <= warmup) return peak;
  const double t = std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(total - warmup));
  const double c = 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
  return peak * (floor_frac + (1.0 - floor_frac) * c);
}

}  // namespace emap::num
