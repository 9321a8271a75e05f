// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "earthmapper/num/graph.hpp"

/// Differentiable primitives.
///
/// Broadcasting is limited to trailing dimensions: in add/sub/mul the second
/// operand may have the same shape as the first or a shape equal to a suffix
/// of it (e.g. a bias of shape [n] against [rows, n]). Anything else is a
/// ShapeError naming both shapes.
namespace emap::num {

/// [..., k] x [k, n] -> [..., n]
template <class T>
Var<T> matmul(Var<T> a, Var<T> b);
/// [m, k] x [n, k]^T -> [m, n]
template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b);
template <class T>
Var<T> transpose(Var<T> a);

template <class T>
Var<T> add(Var<T> a, Var<T> b);
template <class T>
Var<T> sub(Var<T> a, Var<T> b);
template <class T>
Var<T> mul(Var<T> a, Var<T> b);
template <class T>
Var<T> scale(Var<T> a, T factor);

/// Softmax over the last axis.
template <class T>
Var<T> softmax(Var<T> a);
/// Normalizes over the last axis, then applies gamma/beta of that extent.
template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));
/// Exact (erf) GELU.
template <class T>
Var<T> gelu(Var<T> a);

/// Rows of table [V, d] selected by ids -> [ids.size(), d].
template <class T>
Var<T> embedding_lookup(Var<T> table, std::span<const int> ids);

template <class T>
Var<T> reshape(Var<T> a, Shape shape);
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis);
template <class T>
Var<T> slice(Var<T> a, int axis, std::int64_t start, std::int64_t length);

/// Mean of all elements -> rank-0.
template <class T>
Var<T> mean(Var<T> a);
template <class T>
Var<T> sum(Var<T> a);

/// Mean negative log-likelihood of targets under row-wise softmax of
/// logits [n, K]. Targets < 0 are ignored.
template <class T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets);

/// [H, W, C] -> [(H/p)(W/p), p*p*C]; a stride-p, kernel-p convolution is this
/// followed by matmul.
template <class T>
Var<T> space_to_depth(Var<T> x, int patch);
/// Inverse of space_to_depth: [(H/p)(W/p), p*p*C] -> [H, W, C].
template <class T>
Var<T> depth_to_space(Var<T> x, int height, int width, int patch);

/// Multi-head self-attention over a vertical stack of sequences of length
/// limits.size(). qkv is [batch * S, 3 * width] with Q, K and V side by side.
/// Query i attends to keys [0, limits[i]) of its own sequence, so scores for
/// other keys are never computed. Returns [batch * S, width].
template <class T>
Var<T> prefix_attention(Var<T> qkv, int heads, std::span<const int> limits);

}  // namespace emap::num
