// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/num/adamw.hpp"

#include <cmath>

namespace emap::num {

template <class T>
void adamw_step(ParamSet<T>& params, std::span<const Tensor<T>> grads, const AdamWConfig& cfg, AdamWState<T>& state) {
  if (grads.size() != params.size()) {
    throw ShapeError("adamw_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape != params.at(i).shape) {
      throw ShapeError("adamw_step: gradient shape " + to_string(grads[i].shape) + " vs parameter '" +
                       params.name(i) + "' shape " + to_string(params.at(i).shape));
    }
    for (T g : grads[i].data) {
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in parameter '" + params.name(i) + "'");
    }
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m.emplace_back(params.at(i).shape);
      state.v.emplace_back(params.at(i).shape);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T lr = static_cast<T>(cfg.lr);
  const T eps = static_cast<T>(cfg.eps);
  const T step_m = static_cast<T>(1.0 / bc1);
  const T step_v = static_cast<T>(1.0 / bc2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.at(i).data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    const auto& g = grads[i].data;
    const T wd = params.decays(i) ? static_cast<T>(cfg.weight_decay) : T(0);
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T mhat = m[j] * step_m;
      const T vhat = v[j] * step_v;
      p[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[j]);
    }
  }
}

template void adamw_step(ParamSet<float>&, std::span<const Tensor<float>>, const AdamWConfig&, AdamWState<float>&);
template void adamw_step(ParamSet<double>&, std::span<const Tensor<double>>, const AdamWConfig&, AdamWState<double>&);

}  // namespace emap::num
