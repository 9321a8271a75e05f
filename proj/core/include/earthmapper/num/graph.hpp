// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <string>
#include <utility>

#include "earthmapper/num/tensor.hpp"

namespace emap::num {

template <class T>
class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
template <class T>
struct Var {
  Graph<T>* graph = nullptr;
  int id = -1;

  const Tensor<T>& value() const { return graph->value(*this); }
  const Shape& shape() const { return value().shape; }
  bool valid() const { return graph != nullptr && id >= 0; }
};

/// Define-by-run reverse-mode tape.
///
/// Nodes are appended in creation order, which is already a topological
/// order, so backward() walks the tape once in reverse. Parameters are
/// attached by reference (param()) and never copied; their gradients live in
/// the graph, which lets several graphs share read-only weights while each
/// accumulates its own gradients.
template <class T>
class Graph {
 public:
  /// Receives the node's own output value and its accumulated gradient.
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out, const Tensor<T>& out_grad)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Tensor<T> v) { return push(std::move(v), nullptr, false); }
  Var<T> leaf(Tensor<T> v) { return push(std::move(v), nullptr, grad_enabled_); }
  /// Attaches external storage as a trainable leaf. `ext` must outlive the graph.
  Var<T> param(const Tensor<T>& ext) { return push({}, &ext, grad_enabled_); }
  /// Attaches external storage as a constant. `ext` must outlive the graph.
  Var<T> constant_ref(const Tensor<T>& ext) { return push({}, &ext, false); }

  const Tensor<T>& value(Var<T> v) const { return *nodes_[v.id].value; }
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  bool has_grad(Var<T> v) const { return !nodes_[v.id].grad.data.empty(); }

  /// Gradient of the last backward() target w.r.t. v (zeros if v did not contribute).
  const Tensor<T>& grad(Var<T> v) {
    auto& node = nodes_[v.id];
    if (node.grad.data.empty()) node.grad = Tensor<T>(node.value->shape);
    return node.grad;
  }

  /// Mutable gradient buffer for op implementations; allocated on first use.
  Tensor<T>& grad_buffer(int id) {
    auto& node = nodes_[id];
    if (node.grad.data.empty()) node.grad = Tensor<T>(node.value->shape);
    return node.grad;
  }

  /// Records an op output. The backward closure is dropped when no parent
  /// needs a gradient.
  Var<T> emit(Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn fn) {
    bool needs = false;
    if (grad_enabled_) {
      for (const auto& p : parents) needs = needs || nodes_[p.id].requires_grad;
    }
    Var<T> out = push(std::move(value), nullptr, needs);
    if (needs) nodes_[out.id].backward = std::move(fn);
    return out;
  }

  Var<T> emit(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn fn) {
    bool needs = false;
    if (grad_enabled_) {
      for (const auto& p : parents) needs = needs || nodes_[p.id].requires_grad;
    }
    Var<T> out = push(std::move(value), nullptr, needs);
    if (needs) nodes_[out.id].backward = std::move(fn);
    return out;
  }

  void backward(Var<T> loss) {
    if (backward_done_) throw ContractError("backward: graph already consumed by a previous backward pass");
    if (value(loss).size() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + to_string(value(loss).shape));
    }
    backward_done_ = true;
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss.id).data[0] = T{1};
    for (int i = loss.id; i >= 0; --i) {
      auto& node = nodes_[i];
      if (!node.backward || node.grad.data.empty()) continue;
      node.backward(*this, *node.value, node.grad);
      node.backward = nullptr;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* value = nullptr;
    Tensor<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var<T> push(Tensor<T> v, const Tensor<T>* ext, bool requires_grad) {
    auto& node = nodes_.emplace_back();
    node.owned = std::move(v);
    node.value = ext ? ext : &node.owned;
    node.requires_grad = requires_grad;
    return Var<T>{this, static_cast<int>(nodes_.size() - 1)};
  }

  std::deque<Node> nodes_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

}  // namespace emap::num
