// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/hrq/multiscale.hpp"

#include <string>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/resize.hpp"

namespace emap::hrq {

void ScaleSchedule::validate() const {
  if (scales.empty()) throw ConfigError("scale schedule is empty");
  for (std::size_t k = 0; k < scales.size(); ++k) {
    if (scales[k].first < 1 || scales[k].second < 1) throw ConfigError("scale sides must be positive");
    if (k > 0) {
      const auto [ph, pw] = scales[k - 1];
      const auto [h, w] = scales[k];
      if (h < ph || w < pw || h * w <= ph * pw) {
        throw ConfigError("scale " + std::to_string(k) + " (" + std::to_string(h) + "x" + std::to_string(w) +
                          ") does not grow from " + std::to_string(ph) + "x" + std::to_string(pw));
      }
    }
  }
}

int ScaleSchedule::total_positions() const {
  int n = 0;
  for (const auto& [h, w] : scales) n += h * w;
  return n;
}

int ScaleSchedule::offset(int k) const {
  int n = 0;
  for (int m = 0; m < k; ++m) n += area(m);
  return n;
}

ScaleSchedule ScaleSchedule::standard() { return {{{1, 1}, {2, 2}, {4, 4}, {8, 8}, {16, 16}}}; }

void validate(const TokenMap& tm, const ScaleSchedule& sched, int K) {
  if (tm.depth < 1) throw ShapeError("token map depth must be positive");
  if (static_cast<int>(tm.scales.size()) != sched.count()) {
    throw ShapeError("token map has " + std::to_string(tm.scales.size()) + " scales, schedule has " +
                     std::to_string(sched.count()));
  }
  for (int k = 0; k < sched.count(); ++k) {
    if (static_cast<int>(tm.scales[k].size()) != sched.area(k) * tm.depth) {
      throw ShapeError("token map scale " + std::to_string(k) + " has " + std::to_string(tm.scales[k].size()) +
                       " indices, expected " + std::to_string(sched.area(k) * tm.depth));
    }
    for (int q : tm.scales[k]) {
      if (q < 0 || q >= K) throw IndexError("token " + std::to_string(q) + " outside [0, " + std::to_string(K) + ")");
    }
  }
}

LatentGrid resize(const LatentGrid& g, int h, int w) {
  LatentGrid out(h, w, g.d);
  out.data = resize_bilinear(g.data, g.h, g.w, g.d, h, w);
  return out;
}

namespace {

void check_latent(const LatentGrid& latent, const Codebook& cb, const ScaleSchedule& sched) {
  sched.validate();
  const auto [h, w] = sched.scales.back();
  if (latent.h != h || latent.w != w || latent.d != cb.d) {
    throw ShapeError("latent " + std::to_string(latent.h) + "x" + std::to_string(latent.w) + "x" +
                     std::to_string(latent.d) + " does not match final scale " + std::to_string(h) + "x" +
                     std::to_string(w) + "x" + std::to_string(cb.d));
  }
}

void add_into(LatentGrid& acc, const LatentGrid& g) {
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
}

// Shared encoder loop; `residuals` collects every f_k vector when non-null.
TokenMap encode_impl(const LatentGrid& latent, const Codebook& cb, const ScaleSchedule& sched, int depth,
                     std::vector<double>* residuals) {
  check_latent(latent, cb, sched);
  if (depth < 1) throw ConfigError("quantization depth must be at least 1");
  TokenMap tm;
  tm.depth = depth;
  std::vector<LatentGrid> dequant;  // per scale, own resolution
  for (int k = 0; k < sched.count(); ++k) {
    const int h = sched.height(k), w = sched.width(k);
    LatentGrid f = resize(latent, h, w);
    for (int m = 0; m < k; ++m) {
      const LatentGrid up = resize(dequant[m], h, w);
      for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] -= up.data[i];
    }
    if (residuals) residuals->insert(residuals->end(), f.data.begin(), f.data.end());
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(h) * w * depth);
    LatentGrid dq(h, w, cb.d);
    for (int p = 0; p < h * w; ++p) {
      std::span<const double> z(f.data.data() + static_cast<std::size_t>(p) * cb.d, static_cast<std::size_t>(cb.d));
      const Quantized q = quantize_vector(z, cb, depth);
      idx.insert(idx.end(), q.indices.begin(), q.indices.end());
      const auto v = dequantize_vector(q.indices, cb);
      std::copy(v.begin(), v.end(), dq.data.begin() + static_cast<std::ptrdiff_t>(p) * cb.d);
    }
    tm.scales.push_back(std::move(idx));
    dequant.push_back(std::move(dq));
  }
  return tm;
}

}  // namespace

LatentGrid dequantize_scale(const TokenMap& tm, const Codebook& cb, const ScaleSchedule& sched, int k) {
  const int h = sched.height(k), w = sched.width(k);
  LatentGrid g(h, w, cb.d);
  for (int p = 0; p < h * w; ++p) {
    std::span<const int> idx(tm.scales[k].data() + static_cast<std::size_t>(p) * tm.depth,
                             static_cast<std::size_t>(tm.depth));
    const auto v = dequantize_vector(idx, cb);
    std::copy(v.begin(), v.end(), g.data.begin() + static_cast<std::ptrdiff_t>(p) * cb.d);
  }
  return g;
}

TokenMap encode_multiscale(const LatentGrid& latent, const Codebook& cb, const ScaleSchedule& sched, int depth) {
  return encode_impl(latent, cb, sched, depth, nullptr);
}

std::vector<double> multiscale_residuals(const LatentGrid& latent, const Codebook& cb, const ScaleSchedule& sched,
                                         int depth) {
  std::vector<double> out;
  encode_impl(latent, cb, sched, depth, &out);
  return out;
}

LatentGrid decode_partial(const TokenMap& tm, const Codebook& cb, const ScaleSchedule& sched, int last) {
  sched.validate();
  validate(tm, sched, cb.K);
  const auto [h, w] = sched.scales.back();
  LatentGrid acc(h, w, cb.d);
  for (int k = 0; k <= last && k < sched.count(); ++k) add_into(acc, resize(dequantize_scale(tm, cb, sched, k), h, w));
  return acc;
}

LatentGrid decode_multiscale(const TokenMap& tm, const Codebook& cb, const ScaleSchedule& sched) {
  return decode_partial(tm, cb, sched, sched.count() - 1);
}

LatentGrid accumulated_input(const TokenMap& tm, const Codebook& cb, const ScaleSchedule& sched, int k) {
  const int h = sched.height(k), w = sched.width(k);
  LatentGrid acc(h, w, cb.d);
  for (int m = 0; m < k; ++m) add_into(acc, resize(dequantize_scale(tm, cb, sched, m), h, w));
  return acc;
}

}  // namespace emap::hrq
