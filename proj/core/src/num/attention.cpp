// SPDX-License-Identifier: Apache-2.0
#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <string>

#include "earthmapper/num/ops.hpp"

namespace emap::num {
namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Strided = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using StridedC = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

struct Run {
  int begin;
  int end;
  int limit;
};

// Consecutive queries sharing a key limit are handled as one block.
std::vector<Run> runs_of(std::span<const int> limits) {
  std::vector<Run> runs;
  for (int i = 0; i < static_cast<int>(limits.size()); ++i) {
    if (!runs.empty() && runs.back().limit == limits[i]) {
      runs.back().end = i + 1;
    } else {
      runs.push_back({i, i + 1, limits[i]});
    }
  }
  return runs;
}

}  // namespace

template <class T>
Var<T> prefix_attention(Var<T> qkv, int heads, std::span<const int> limits) {
  const auto& x = qkv.value();
  const auto seq = static_cast<std::int64_t>(limits.size());
  if (x.rank() != 2 || seq == 0 || x.dim(0) % seq != 0 || heads < 1 || x.dim(1) % (3 * heads) != 0) {
    throw ShapeError("prefix_attention: qkv shape " + to_string(x.shape) + " does not fit sequence length " +
                     std::to_string(seq) + " and " + std::to_string(heads) + " heads");
  }
  for (auto l : limits) {
    if (l < 1 || l > seq) throw ShapeError("prefix_attention: key limit " + std::to_string(l) + " out of range");
  }
  const std::int64_t batch = x.dim(0) / seq, width = x.dim(1) / 3, dh = width / heads, stride = 3 * width;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const auto runs = runs_of(limits);

  // Attention probabilities per (sequence, head), row-major seq x seq; entries
  // past a row's limit stay zero.
  auto probs = std::make_shared<Storage<T>>(static_cast<std::size_t>(batch * heads * seq * seq), T(0));
  Tensor<T> out({batch * seq, width});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const T* base = x.ptr() + b * seq * stride + h * dh;
      StridedC<T> q(base, seq, dh, Eigen::OuterStride<>(stride));
      StridedC<T> k(base + width, seq, dh, Eigen::OuterStride<>(stride));
      StridedC<T> v(base + 2 * width, seq, dh, Eigen::OuterStride<>(stride));
      Strided<T> o(out.ptr() + b * seq * width + h * dh, seq, dh, Eigen::OuterStride<>(width));
      T* pb = probs->data() + (b * heads + h) * seq * seq;
      Eigen::Map<RowMat<T>> p(pb, seq, seq);
      for (const auto& r : runs) {
        const int n = r.end - r.begin;
        auto blk = p.block(r.begin, 0, n, r.limit);
        blk.noalias() = (q.middleRows(r.begin, n) * k.topRows(r.limit).transpose()) * scale;
        for (int i = 0; i < n; ++i) {
          auto row = blk.row(i);
          const T mx = row.maxCoeff();
          row = (row.array() - mx).exp().matrix();
          row /= row.sum();
        }
        o.middleRows(r.begin, n).noalias() = blk * v.topRows(r.limit);
      }
    }
  }

  return qkv.graph->emit(
      std::move(out), {qkv},
      [qkv, probs, runs, batch, seq, heads, width, dh, stride, scale](Graph<T>& g, const Tensor<T>&,
                                                                      const Tensor<T>& dy) {
        const auto& xv = g.value(qkv);
        auto& gx = g.grad_buffer(qkv.id);
        RowMat<T> dp, ds;
        for (std::int64_t b = 0; b < batch; ++b) {
          for (int h = 0; h < heads; ++h) {
            const std::int64_t off = b * seq * stride + h * dh;
            StridedC<T> q(xv.ptr() + off, seq, dh, Eigen::OuterStride<>(stride));
            StridedC<T> k(xv.ptr() + off + width, seq, dh, Eigen::OuterStride<>(stride));
            StridedC<T> v(xv.ptr() + off + 2 * width, seq, dh, Eigen::OuterStride<>(stride));
            Strided<T> gq(gx.ptr() + off, seq, dh, Eigen::OuterStride<>(stride));
            Strided<T> gk(gx.ptr() + off + width, seq, dh, Eigen::OuterStride<>(stride));
            Strided<T> gv(gx.ptr() + off + 2 * width, seq, dh, Eigen::OuterStride<>(stride));
            StridedC<T> go(dy.ptr() + b * seq * width + h * dh, seq, dh, Eigen::OuterStride<>(width));
            Eigen::Map<const RowMat<T>> p(probs->data() + (b * heads + h) * seq * seq, seq, seq);
            for (const auto& r : runs) {
              const int n = r.end - r.begin;
              const auto pblk = p.block(r.begin, 0, n, r.limit);
              const auto gob = go.middleRows(r.begin, n);
              dp.noalias() = gob * v.topRows(r.limit).transpose();
              gv.topRows(r.limit).noalias() += pblk.transpose() * gob;
              const auto rowdot = (dp.array() * pblk.array()).rowwise().sum().eval();
              ds = (pblk.array() * (dp.array().colwise() - rowdot)).matrix() * scale;
              gq.middleRows(r.begin, n).noalias() += ds * k.topRows(r.limit);
              gk.topRows(r.limit).noalias() += ds.transpose() * q.middleRows(r.begin, n);
            }
          }
        }
      });
}

template Var<float> prefix_attention(Var<float>, int, std::span<const int>);
template Var<double> prefix_attention(Var<double>, int, std::span<const int>);

}  // namespace emap::num
