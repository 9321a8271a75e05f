// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "earthmapper/num/graph.hpp"

namespace emap::num {

/// Named trainable tensors in registration order. Addresses are stable, so
/// graphs may hold references to the values.
template <class T>
class ParamSet {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> init, bool decay = true) {
    if (index_.count(name)) throw ConfigError("ParamSet: duplicate parameter '" + name + "'");
    index_.emplace(name, names_.size());
    names_.push_back(name);
    decay_.push_back(decay);
    return values_.emplace_back(std::move(init));
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw IndexError("ParamSet: unknown parameter '" + name + "'");
    return it->second;
  }

  Tensor<T>& get(const std::string& name) { return values_[index_of(name)]; }
  const Tensor<T>& get(const std::string& name) const { return values_[index_of(name)]; }
  Tensor<T>& at(std::size_t i) { return values_[i]; }
  const Tensor<T>& at(std::size_t i) const { return values_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  bool decays(std::size_t i) const { return decay_[i]; }
  std::size_t size() const { return names_.size(); }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::vector<bool> decay_;
  std::deque<Tensor<T>> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Attaches a ParamSet to one graph, creating each parameter node on first
/// use so every reference inside the graph shares a single node.
template <class T>
class BoundParams {
 public:
  BoundParams(Graph<T>& g, const ParamSet<T>& ps) : graph_(g), params_(ps), vars_(ps.size()) {}

  Var<T> operator()(const std::string& name) { return at(params_.index_of(name)); }
  Var<T> at(std::size_t i) {
    if (!vars_[i].valid()) vars_[i] = graph_.param(params_.at(i));
    return vars_[i];
  }
  Graph<T>& graph() { return graph_; }

  /// Gradients in ParamSet order; parameters the loss never touched get zeros.
  std::vector<Tensor<T>> grads() {
    std::vector<Tensor<T>> out;
    out.reserve(vars_.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      out.push_back(vars_[i].valid() ? graph_.grad(vars_[i]) : Tensor<T>(params_.at(i).shape));
    }
    return out;
  }

 private:
  Graph<T>& graph_;
  const ParamSet<T>& params_;
  std::vector<Var<T>> vars_;
};

}  // namespace emap::num
