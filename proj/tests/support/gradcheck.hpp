// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "earthmapper/common/rng.hpp"
#include "earthmapper/num/graph.hpp"

namespace emap::testing {

using num::Graph;
using num::Tensor;
using num::Var;

/// Builds a scalar loss from leaves attached to the given graph.
using LossBuilder = std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;  // worst over inputs of ||analytic - numeric|| / (||analytic|| + ||numeric||)
  std::vector<Tensor<double>> analytic;
  std::vector<Tensor<double>> numeric;
};

inline double evaluate_loss(const LossBuilder& build, const std::vector<Tensor<double>>& inputs) {
  Graph<double> g(false);
  std::vector<Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(g.leaf(t));
  return build(g, leaves).value().item();
}

/// Central finite differences with step h against reverse-mode gradients.
inline GradCheckResult grad_check(const LossBuilder& build, std::vector<Tensor<double>> inputs, double h = 1e-5) {
  GradCheckResult result;
  {
    Graph<double> g;
    std::vector<Var<double>> leaves;
    for (const auto& t : inputs) leaves.push_back(g.leaf(t));
    auto loss = build(g, leaves);
    g.backward(loss);
    for (auto& leaf : leaves) result.analytic.push_back(g.grad(leaf));
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor<double> numeric(inputs[i].shape);
    for (std::size_t j = 0; j < inputs[i].data.size(); ++j) {
      const double orig = inputs[i].data[j];
      inputs[i].data[j] = orig + h;
      const double up = evaluate_loss(build, inputs);
      inputs[i].data[j] = orig - h;
      const double down = evaluate_loss(build, inputs);
      inputs[i].data[j] = orig;
      numeric.data[j] = (up - down) / (2.0 * h);
    }
    double diff = 0, na = 0, nn = 0;
    for (std::size_t j = 0; j < numeric.data.size(); ++j) {
      const double a = result.analytic[i].data[j];
      diff += (a - numeric.data[j]) * (a - numeric.data[j]);
      na += a * a;
      nn += numeric.data[j] * numeric.data[j];
    }
    const double denom = std::sqrt(na) + std::sqrt(nn);
    const double rel = denom > 1e-12 ? std::sqrt(diff) / denom : std::sqrt(diff);
    result.max_rel_error = std::max(result.max_rel_error, rel);
    result.numeric.push_back(std::move(numeric));
  }
  return result;
}

inline Tensor<double> random_tensor(num::Shape shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.normal() * scale;
  return t;
}

}  // namespace emap::testing
