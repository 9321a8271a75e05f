// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/num/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace emap::num {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapC = Eigen::Map<const RowMat<T>>;
template <class T>
using MapM = Eigen::Map<RowMat<T>>;
template <class T>
using VecMapC = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
template <class T>
using VecMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

bool is_suffix(const Shape& full, const Shape& tail) {
  if (tail.size() > full.size()) return false;
  return std::equal(tail.begin(), tail.end(), full.end() - static_cast<std::ptrdiff_t>(tail.size()));
}

int norm_axis(int axis, int rank, const char* op) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range");
  return a;
}

template <class T>
void accumulate(Graph<T>& g, Var<T> v, const T* src) {
  auto& buf = g.grad_buffer(v.id);
  VecMap<T>(buf.ptr(), buf.size()) += VecMapC<T>(src, buf.size());
}

using std::int64_t;

}  // namespace

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (bv.rank() != 2 || av.rank() < 1 || av.dim(-1) != bv.dim(0)) shape_fail("matmul", av.shape, bv.shape);
  const auto k = bv.dim(0);
  const auto n = bv.dim(1);
  const auto m = av.size() / k;
  Shape out_shape = av.shape;
  out_shape.back() = n;
  Tensor<T> out(out_shape);
  MapM<T>(out.ptr(), m, n).noalias() = MapC<T>(av.ptr(), m, k) * MapC<T>(bv.ptr(), k, n);
  return a.graph->emit(std::move(out), {a, b}, [a, b, m, k, n](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
    MapC<T> dY(dy.ptr(), m, n);
    if (g.requires_grad(a)) {
      auto& ga = g.grad_buffer(a.id);
      MapM<T>(ga.ptr(), m, k).noalias() += dY * MapC<T>(g.value(b).ptr(), k, n).transpose();
    }
    if (g.requires_grad(b)) {
      auto& gb = g.grad_buffer(b.id);
      MapM<T>(gb.ptr(), k, n).noalias() += MapC<T>(g.value(a).ptr(), m, k).transpose() * dY;
    }
  });
}

template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1)) shape_fail("matmul_nt", av.shape, bv.shape);
  const auto m = av.dim(0);
  const auto k = av.dim(1);
  const auto n = bv.dim(0);
  Tensor<T> out({m, n});
  MapM<T>(out.ptr(), m, n).noalias() = MapC<T>(av.ptr(), m, k) * MapC<T>(bv.ptr(), n, k).transpose();
  return a.graph->emit(std::move(out), {a, b}, [a, b, m, k, n](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
    MapC<T> dY(dy.ptr(), m, n);
    if (g.requires_grad(a)) {
      auto& ga = g.grad_buffer(a.id);
      MapM<T>(ga.ptr(), m, k).noalias() += dY * MapC<T>(g.value(b).ptr(), n, k);
    }
    if (g.requires_grad(b)) {
      auto& gb = g.grad_buffer(b.id);
      MapM<T>(gb.ptr(), n, k).noalias() += dY.transpose() * MapC<T>(g.value(a).ptr(), m, k);
    }
  });
}

template <class T>
Var<T> transpose(Var<T> a) {
  const auto& av = a.value();
  if (av.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + to_string(av.shape));
  const auto m = av.dim(0);
  const auto n = av.dim(1);
  Tensor<T> out({n, m});
  MapM<T>(out.ptr(), n, m) = MapC<T>(av.ptr(), m, n).transpose();
  return a.graph->emit(std::move(out), {a}, [a, m, n](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
    auto& ga = g.grad_buffer(a.id);
    MapM<T>(ga.ptr(), m, n) += MapC<T>(dy.ptr(), n, m).transpose();
  });
}

namespace {

enum class Binary { kAdd, kSub, kMul };

template <class T>
Var<T> binary(Var<T> a, Var<T> b, Binary kind, const char* name) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (!is_suffix(av.shape, bv.shape)) shape_fail(name, av.shape, bv.shape);
  const auto inner = bv.size();
  const auto outer = av.size() / inner;
  Tensor<T> out(av.shape);
  for (int64_t o = 0; o < outer; ++o) {
    VecMap<T> y(out.ptr() + o * inner, inner);
    VecMapC<T> x(av.ptr() + o * inner, inner);
    VecMapC<T> z(bv.ptr(), inner);
    switch (kind) {
      case Binary::kAdd: y = x + z; break;
      case Binary::kSub: y = x - z; break;
      case Binary::kMul: y = x * z; break;
    }
  }
  return a.graph->emit(std::move(out), {a, b},
                       [a, b, kind, outer, inner](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
                         const bool ga_on = g.requires_grad(a);
                         const bool gb_on = g.requires_grad(b);
                         for (int64_t o = 0; o < outer; ++o) {
                           VecMapC<T> d(dy.ptr() + o * inner, inner);
                           if (ga_on) {
                             VecMap<T> ga(g.grad_buffer(a.id).ptr() + o * inner, inner);
                             if (kind == Binary::kMul) {
                               ga += d * VecMapC<T>(g.value(b).ptr(), inner);
                             } else {
                               ga += d;
                             }
                           }
                           if (gb_on) {
                             VecMap<T> gb(g.grad_buffer(b.id).ptr(), inner);
                             switch (kind) {
                               case Binary::kAdd: gb += d; break;
                               case Binary::kSub: gb -= d; break;
                               case Binary::kMul: gb += d * VecMapC<T>(g.value(a).ptr() + o * inner, inner); break;
                             }
                           }
                         }
                       });
}

}  // namespace

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  return binary(a, b, Binary::kAdd, "add");
}
template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  return binary(a, b, Binary::kSub, "sub");
}
template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  return binary(a, b, Binary::kMul, "mul");
}

template <class T>
Var<T> scale(Var<T> a, T factor) {
  const auto& av = a.value();
  Tensor<T> out(av.shape);
  VecMap<T>(out.ptr(), out.size()) = VecMapC<T>(av.ptr(), av.size()) * factor;
  return a.graph->emit(std::move(out), {a}, [a, factor](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
    auto& ga = g.grad_buffer(a.id);
    VecMap<T>(ga.ptr(), ga.size()) += VecMapC<T>(dy.ptr(), dy.size()) * factor;
  });
}

template <class T>
Var<T> softmax(Var<T> a) {
  const auto& av = a.value();
  if (av.rank() < 1) throw ShapeError("softmax: rank-0 input");
  const auto n = av.dim(-1);
  const auto rows = av.size() / n;
  Tensor<T> out(av.shape);
  for (int64_t r = 0; r < rows; ++r) {
    const T* x = av.ptr() + r * n;
    T* y = out.ptr() + r * n;
    const T mx = *std::max_element(x, x + n);
    T total = 0;
    for (int64_t i = 0; i < n; ++i) {
      y[i] = std::exp(x[i] - mx);
      total += y[i];
    }
    const T inv = T(1) / total;
    for (int64_t i = 0; i < n; ++i) y[i] *= inv;
  }
  return a.graph->emit(std::move(out), {a}, [a, n, rows](Graph<T>& g, const Tensor<T>& y, const Tensor<T>& dy) {
    auto& ga = g.grad_buffer(a.id);
    for (int64_t r = 0; r < rows; ++r) {
      const T* yr = y.ptr() + r * n;
      const T* dr = dy.ptr() + r * n;
      T dot = 0;
      for (int64_t i = 0; i < n; ++i) dot += yr[i] * dr[i];
      T* out = ga.ptr() + r * n;
      for (int64_t i = 0; i < n; ++i) out[i] += yr[i] * (dr[i] - dot);
    }
  });
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  const auto& xv = x.value();
  if (xv.rank() < 1) throw ShapeError("layer_norm: rank-0 input");
  const auto n = xv.dim(-1);
  if (gamma.value().shape != Shape{n}) shape_fail("layer_norm", xv.shape, gamma.value().shape);
  if (beta.value().shape != Shape{n}) shape_fail("layer_norm", xv.shape, beta.value().shape);
  const auto rows = xv.size() / n;
  Tensor<T> out(xv.shape);
  Tensor<T> xhat(xv.shape);
  std::vector<T> rstd(static_cast<std::size_t>(rows));
  const T* gv = gamma.value().ptr();
  const T* bv = beta.value().ptr();
  for (int64_t r = 0; r < rows; ++r) {
    const T* xr = xv.ptr() + r * n;
    T mu = 0;
    for (int64_t i = 0; i < n; ++i) mu += xr[i];
    mu /= static_cast<T>(n);
    T var = 0;
    for (int64_t i = 0; i < n; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<T>(n);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[r] = rs;
    T* hr = xhat.ptr() + r * n;
    T* yr = out.ptr() + r * n;
    for (int64_t i = 0; i < n; ++i) {
      hr[i] = (xr[i] - mu) * rs;
      yr[i] = hr[i] * gv[i] + bv[i];
    }
  }
  return x.graph->emit(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, n, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Graph<T>& g, const Tensor<T>&,
                                                                               const Tensor<T>& dy) {
        const T* gv = g.value(gamma).ptr();
        const bool gx = g.requires_grad(x);
        T* dgamma = g.requires_grad(gamma) ? g.grad_buffer(gamma.id).ptr() : nullptr;
        T* dbeta = g.requires_grad(beta) ? g.grad_buffer(beta.id).ptr() : nullptr;
        T* dx = gx ? g.grad_buffer(x.id).ptr() : nullptr;
        for (int64_t r = 0; r < rows; ++r) {
          const T* hr = xhat.ptr() + r * n;
          const T* dr = dy.ptr() + r * n;
          if (dgamma) {
            for (int64_t i = 0; i < n; ++i) dgamma[i] += dr[i] * hr[i];
          }
          if (dbeta) {
            for (int64_t i = 0; i < n; ++i) dbeta[i] += dr[i];
          }
          if (dx) {
            T mean_d = 0;
            T mean_dh = 0;
            for (int64_t i = 0; i < n; ++i) {
              const T d = dr[i] * gv[i];
              mean_d += d;
              mean_dh += d * hr[i];
            }
            mean_d /= static_cast<T>(n);
            mean_dh /= static_cast<T>(n);
            T* out = dx + r * n;
            for (int64_t i = 0; i < n; ++i) out[i] += rstd[r] * (dr[i] * gv[i] - mean_d - hr[i] * mean_dh);
          }
        }
      });
}

template <class T>
Var<T> gelu(Var<T> a) {
  const auto& av = a.value();
  Tensor<T> out(av.shape);
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (int64_t i = 0; i < av.size(); ++i) {
    const T x = av.data[i];
    out.data[i] = T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2));
  }
  return a.graph->emit(std::move(out), {a}, [a, inv_sqrt2](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
    const auto& xv = g.value(a);
    auto& ga = g.grad_buffer(a.id);
    const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    for (int64_t i = 0; i < xv.size(); ++i) {
      const T x = xv.data[i];
      const T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
      const T pdf = std::exp(T(-0.5) * x * x) * inv_sqrt_2pi;
      ga.data[i] += dy.data[i] * (cdf + x * pdf);
    }
  });
}

template <class T>
Var<T> embedding_lookup(Var<T> table, std::span<const int> ids) {
  const auto& tv = table.value();
  if (tv.rank() != 2) throw ShapeError("embedding_lookup: table must be rank 2, got " + to_string(tv.shape));
  const auto vocab = tv.dim(0);
  const auto d = tv.dim(1);
  const auto n = static_cast<int64_t>(ids.size());
  Tensor<T> out({n, d});
  std::vector<int> idx(ids.begin(), ids.end());
  for (int64_t i = 0; i < n; ++i) {
    if (idx[i] < 0 || idx[i] >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(idx[i]) + " outside [0, " + std::to_string(vocab) +
                       ")");
    }
    std::copy_n(tv.ptr() + idx[i] * d, d, out.ptr() + i * d);
  }
  return table.graph->emit(std::move(out), {table},
                           [table, d, idx = std::move(idx)](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
                             auto& gt = g.grad_buffer(table.id);
                             for (std::size_t i = 0; i < idx.size(); ++i) {
                               T* row = gt.ptr() + idx[i] * d;
                               const T* src = dy.ptr() + static_cast<int64_t>(i) * d;
                               for (int64_t j = 0; j < d; ++j) row[j] += src[j];
                             }
                           });
}

template <class T>
Var<T> reshape(Var<T> a, Shape shape) {
  const auto& av = a.value();
  if (numel(shape) != av.size()) shape_fail("reshape", av.shape, shape);
  Tensor<T> out(std::move(shape), av.data);
  return a.graph->emit(std::move(out), {a}, [a](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
    accumulate(g, a, dy.ptr());
  });
}

template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const auto& first = parts.front().value();
  const int ax = norm_axis(axis, first.rank(), "concat");
  int64_t outer = 1;
  for (int i = 0; i < ax; ++i) outer *= first.shape[i];
  int64_t trail = 1;
  for (int i = ax + 1; i < first.rank(); ++i) trail *= first.shape[i];
  Shape out_shape = first.shape;
  out_shape[ax] = 0;
  std::vector<int64_t> widths;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    if (pv.rank() != first.rank()) shape_fail("concat", first.shape, pv.shape);
    for (int i = 0; i < first.rank(); ++i) {
      if (i != ax && pv.shape[i] != first.shape[i]) shape_fail("concat", first.shape, pv.shape);
    }
    out_shape[ax] += pv.shape[ax];
    widths.push_back(pv.shape[ax] * trail);
  }
  const int64_t row = out_shape[ax] * trail;
  Tensor<T> out(out_shape);
  int64_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& pv = parts[p].value();
    for (int64_t o = 0; o < outer; ++o) {
      std::copy_n(pv.ptr() + o * widths[p], widths[p], out.ptr() + o * row + offset);
    }
    offset += widths[p];
  }
  return parts.front().graph->emit(
      std::move(out), parts, [parts, widths, outer, row](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
        int64_t off = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
          if (g.requires_grad(parts[p])) {
            auto& gp = g.grad_buffer(parts[p].id);
            for (int64_t o = 0; o < outer; ++o) {
              VecMap<T>(gp.ptr() + o * widths[p], widths[p]) += VecMapC<T>(dy.ptr() + o * row + off, widths[p]);
            }
          }
          off += widths[p];
        }
      });
}

template <class T>
Var<T> slice(Var<T> a, int axis, int64_t start, int64_t length) {
  const auto& av = a.value();
  const int ax = norm_axis(axis, av.rank(), "slice");
  if (start < 0 || length < 0 || start + length > av.shape[ax]) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside axis of extent " + std::to_string(av.shape[ax]) + " in " + to_string(av.shape));
  }
  int64_t outer = 1;
  for (int i = 0; i < ax; ++i) outer *= av.shape[i];
  int64_t trail = 1;
  for (int i = ax + 1; i < av.rank(); ++i) trail *= av.shape[i];
  const int64_t src_row = av.shape[ax] * trail;
  const int64_t dst_row = length * trail;
  const int64_t off = start * trail;
  Shape out_shape = av.shape;
  out_shape[ax] = length;
  Tensor<T> out(out_shape);
  for (int64_t o = 0; o < outer; ++o) std::copy_n(av.ptr() + o * src_row + off, dst_row, out.ptr() + o * dst_row);
  return a.graph->emit(std::move(out), {a},
                       [a, outer, src_row, dst_row, off](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
                         auto& ga = g.grad_buffer(a.id);
                         for (int64_t o = 0; o < outer; ++o) {
                           VecMap<T>(ga.ptr() + o * src_row + off, dst_row) += VecMapC<T>(dy.ptr() + o * dst_row, dst_row);
                         }
                       });
}

template <class T>
Var<T> sum(Var<T> a) {
  const auto& av = a.value();
  T total = 0;
  for (T v : av.data) total += v;
  return a.graph->emit(Tensor<T>::scalar(total), {a}, [a](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
    auto& ga = g.grad_buffer(a.id);
    VecMap<T>(ga.ptr(), ga.size()) += dy.data[0];
  });
}

template <class T>
Var<T> mean(Var<T> a) {
  const auto& av = a.value();
  if (av.size() == 0) throw ShapeError("mean: empty tensor");
  T total = 0;
  for (T v : av.data) total += v;
  const T inv = T(1) / static_cast<T>(av.size());
  return a.graph->emit(Tensor<T>::scalar(total * inv), {a},
                       [a, inv](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
                         auto& ga = g.grad_buffer(a.id);
                         VecMap<T>(ga.ptr(), ga.size()) += dy.data[0] * inv;
                       });
}

template <class T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets) {
  const auto& lv = logits.value();
  if (lv.rank() != 2 || lv.dim(0) != static_cast<int64_t>(targets.size())) {
    shape_fail("cross_entropy", lv.shape, Shape{static_cast<int64_t>(targets.size())});
  }
  const auto rows = lv.dim(0);
  const auto k = lv.dim(1);
  std::vector<int> tgt(targets.begin(), targets.end());
  Tensor<T> probs(lv.shape);
  T total = 0;
  int64_t counted = 0;
  for (int64_t r = 0; r < rows; ++r) {
    const T* x = lv.ptr() + r * k;
    T* p = probs.ptr() + r * k;
    const T mx = *std::max_element(x, x + k);
    T z = 0;
    for (int64_t i = 0; i < k; ++i) {
      p[i] = std::exp(x[i] - mx);
      z += p[i];
    }
    for (int64_t i = 0; i < k; ++i) p[i] /= z;
    if (tgt[r] < 0) continue;
    if (tgt[r] >= k) throw IndexError("cross_entropy: target " + std::to_string(tgt[r]) + " >= " + std::to_string(k));
    total += std::log(z) + mx - x[tgt[r]];
    ++counted;
  }
  if (counted == 0) throw ShapeError("cross_entropy: no valid targets");
  const T inv = T(1) / static_cast<T>(counted);
  return logits.graph->emit(
      Tensor<T>::scalar(total * inv), {logits},
      [logits, rows, k, inv, tgt = std::move(tgt), probs = std::move(probs)](Graph<T>& g, const Tensor<T>&,
                                                                            const Tensor<T>& dy) {
        auto& gl = g.grad_buffer(logits.id);
        const T s = dy.data[0] * inv;
        for (int64_t r = 0; r < rows; ++r) {
          if (tgt[r] < 0) continue;
          T* out = gl.ptr() + r * k;
          const T* p = probs.ptr() + r * k;
          for (int64_t i = 0; i < k; ++i) out[i] += s * p[i];
          out[tgt[r]] -= s;
        }
      });
}

namespace {

// Calls fn(dst_index, src_index, count) for every contiguous channel run of
// the [H, W, C] <-> [(H/p)(W/p), p*p*C] permutation.
template <class Fn>
void for_each_patch_run(int64_t h, int64_t w, int64_t c, int64_t p, Fn&& fn) {
  const int64_t bw = w / p;
  for (int64_t by = 0; by < h / p; ++by) {
    for (int64_t bx = 0; bx < bw; ++bx) {
      const int64_t block = (by * bw + bx) * p * p * c;
      for (int64_t dy = 0; dy < p; ++dy) {
        for (int64_t dx = 0; dx < p; ++dx) {
          const int64_t pix = ((by * p + dy) * w + (bx * p + dx)) * c;
          fn(block + (dy * p + dx) * c, pix, c);
        }
      }
    }
  }
}

}  // namespace

template <class T>
Var<T> space_to_depth(Var<T> x, int patch) {
  const auto& xv = x.value();
  if (xv.rank() != 3 || patch <= 0 || xv.dim(0) % patch != 0 || xv.dim(1) % patch != 0) {
    throw ShapeError("space_to_depth: shape " + to_string(xv.shape) + " not divisible by patch " +
                     std::to_string(patch));
  }
  const int64_t h = xv.dim(0), w = xv.dim(1), c = xv.dim(2), p = patch;
  Tensor<T> out({(h / p) * (w / p), p * p * c});
  for_each_patch_run(h, w, c, p, [&](int64_t dst, int64_t src, int64_t n) {
    std::copy_n(xv.ptr() + src, n, out.ptr() + dst);
  });
  return x.graph->emit(std::move(out), {x}, [x, h, w, c, p](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
    auto& gx = g.grad_buffer(x.id);
    for_each_patch_run(h, w, c, p, [&](int64_t dst, int64_t src, int64_t n) {
      for (int64_t i = 0; i < n; ++i) gx.data[src + i] += dy.data[dst + i];
    });
  });
}

template <class T>
Var<T> depth_to_space(Var<T> x, int height, int width, int patch) {
  const auto& xv = x.value();
  const int64_t p = patch;
  if (xv.rank() != 2 || patch <= 0 || height % patch != 0 || width % patch != 0 ||
      xv.dim(0) != static_cast<int64_t>(height / p) * (width / p) || xv.dim(1) % (p * p) != 0) {
    throw ShapeError("depth_to_space: shape " + to_string(xv.shape) + " incompatible with " + std::to_string(height) +
                     "x" + std::to_string(width) + " patch " + std::to_string(patch));
  }
  const int64_t h = height, w = width, c = xv.dim(1) / (p * p);
  Tensor<T> out({h, w, c});
  for_each_patch_run(h, w, c, p, [&](int64_t dst, int64_t src, int64_t n) {
    std::copy_n(xv.ptr() + dst, n, out.ptr() + src);
  });
  return x.graph->emit(std::move(out), {x}, [x, h, w, c, p](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
    auto& gx = g.grad_buffer(x.id);
    for_each_patch_run(h, w, c, p, [&](int64_t dst, int64_t src, int64_t n) {
      for (int64_t i = 0; i < n; ++i) gx.data[dst + i] += dy.data[src + i];
    });
  });
}

#define EMAP_INSTANTIATE_OPS(T)                                                  \
  template Var<T> matmul(Var<T>, Var<T>);                                        \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                     \
  template Var<T> transpose(Var<T>);                                             \
  template Var<T> add(Var<T>, Var<T>);                                           \
  template Var<T> sub(Var<T>, Var<T>);                                           \
  template Var<T> mul(Var<T>, Var<T>);                                           \
  template Var<T> scale(Var<T>, T);                                              \
  template Var<T> softmax(Var<T>);                                               \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                         \
  template Var<T> gelu(Var<T>);                                                  \
  template Var<T> embedding_lookup(Var<T>, std::span<const int>);                \
  template Var<T> reshape(Var<T>, Shape);                                        \
  template Var<T> concat(const std::vector<Var<T>>&, int);                       \
  template Var<T> slice(Var<T>, int, int64_t, int64_t);                          \
  template Var<T> mean(Var<T>);                                                  \
  template Var<T> sum(Var<T>);                                                   \
  template Var<T> cross_entropy(Var<T>, std::span<const int>);                   \
  template Var<T> space_to_depth(Var<T>, int);                                   \
  template Var<T> depth_to_space(Var<T>, int, int, int);

EMAP_INSTANTIATE_OPS(float)
EMAP_INSTANTIATE_OPS(double)

}  // namespace emap::num
