// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/gjsa/model.hpp"

#include <cmath>
#include <string>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/rng.hpp"
#include "earthmapper/num/ops.hpp"

namespace emap::gjsa {

using num::Shape;
using num::Tensor;
using num::Var;

JointBatch make_batch(const std::vector<const JointSequence*>& seqs, const std::vector<Conditioning>& cond,
                      const ModelConfig& cfg) {
  if (seqs.empty()) throw ShapeError("make_batch: no sequences");
  if (cond.size() != seqs.size()) throw ShapeError("make_batch: one conditioning entry per sequence required");
  const auto& first = *seqs.front();
  const auto& sched = cfg.schedule;
  JointBatch b;
  b.size = static_cast<int>(seqs.size());
  b.length = first.length();
  b.limits = key_limits(first.slots);
  b.targets.assign(cfg.depth, {});
  b.scale_rows.assign(sched.count(), {});
  for (int i = 0; i < b.size; ++i) {
    const auto& s = *seqs[i];
    if (s.length() != b.length || s.latent_dim != cfg.latent_dim || s.depth != cfg.depth) {
      throw ShapeError("make_batch: sequence " + std::to_string(i) + " does not match the batch layout");
    }
    for (int t = 0; t < b.length; ++t) {
      if (s.slots[t].scale != first.slots[t].scale) throw ShapeError("make_batch: slot scales differ between sequences");
    }
    b.geo.push_back(s.geo);
    b.cond.push_back(cond[i]);
    b.inputs.insert(b.inputs.end(), s.inputs.begin(), s.inputs.end());
    std::vector<std::vector<int>> rows(sched.count());
    for (int m = 0; m < 2; ++m) {
      for (int k = 0; k < sched.count(); ++k) rows[k].resize(static_cast<std::size_t>(2) * sched.area(k), -1);
    }
    for (int t = 0; t < b.length; ++t) {
      const auto& sl = s.slots[t];
      const int row = i * b.length + t;
      if (sl.scale < 0) {
        b.scale_ids.push_back(sched.count());
        b.modality_ids.push_back(2);
        b.pos_ids.push_back(sched.total_positions());
      } else {
        if (sl.scale >= sched.count() || sl.pos >= sched.area(sl.scale)) {
          throw ShapeError("make_batch: slot outside the schedule");
        }
        b.scale_ids.push_back(sl.scale);
        b.modality_ids.push_back(sl.modality);
        b.pos_ids.push_back(sched.offset(sl.scale) + sl.pos);
        rows[sl.scale][static_cast<std::size_t>(sl.modality) * sched.area(sl.scale) + sl.pos] = row;
      }
      for (int j = 0; j < cfg.depth; ++j) b.targets[j].push_back(s.targets[static_cast<std::size_t>(t) * cfg.depth + j]);
    }
    for (int k = 0; k < sched.count(); ++k) {
      for (int r : rows[k]) {
        if (r >= 0) b.scale_rows[k].push_back(r);
      }
    }
  }
  return b;
}

namespace {

template <class T>
Tensor<T> normal_init(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

template <class T>
Var<T> linear(num::BoundParams<T>& w, Var<T> x, const std::string& name) {
  return num::add(num::matmul(x, w(name + ".w")), w(name + ".b"));
}

template <class T>
Tensor<T> to_tensor(Shape shape, const std::vector<double>& v) {
  return Tensor<T>(std::move(shape), std::vector<T>(v.begin(), v.end()));
}

}  // namespace

template <class T>
GjsaModel<T>::GjsaModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(Rng::derive(cfg_.seed, 0x67a));
  const std::int64_t W = cfg_.width, E = cfg_.geo_dims, K = cfg_.vocab;
  const std::int64_t hidden = W * cfg_.mlp_ratio;
  const double std0 = 0.02, proj_std = 0.02 / std::sqrt(2.0 * cfg_.layers);
  auto weight = [&](const std::string& n, Shape s, double sd) { params_.add(n, normal_init<T>(std::move(s), sd, rng)); };
  auto bias = [&](const std::string& n, std::int64_t d) { params_.add(n, Tensor<T>({d}), false); };
  auto norm = [&](const std::string& n) {
    params_.add(n + ".g", Tensor<T>({W}, T(1)), false);
    params_.add(n + ".b", Tensor<T>({W}), false);
  };

  weight("geo.w", {2 * E, W}, 1.0 / std::sqrt(static_cast<double>(2 * E)));
  bias("geo.b", W);
  weight("geo2.w", {W, W}, 1.0 / std::sqrt(static_cast<double>(W)));
  bias("geo2.b", W);
  weight("null.geo", {1, W}, std0);
  weight("null.cond", {1, W}, std0);
  weight("in.w", {cfg_.latent_dim, W}, 1.0 / std::sqrt(static_cast<double>(cfg_.latent_dim)));
  bias("in.b", W);
  weight("emb.scale", {cfg_.schedule.count() + 1, W}, std0);
  weight("emb.mod", {3, W}, std0);
  weight("emb.pos", {cfg_.schedule.total_positions() + 1, W}, std0);
  for (int l = 0; l < cfg_.layers; ++l) {
    const auto p = "blk." + std::to_string(l);
    norm(p + ".ln1");
    weight(p + ".qkv.w", {W, 3 * W}, std0);
    bias(p + ".qkv.b", 3 * W);
    weight(p + ".proj.w", {W, W}, proj_std);
    bias(p + ".proj.b", W);
    norm(p + ".ln2");
    weight(p + ".fc.w", {W, hidden}, std0);
    bias(p + ".fc.b", hidden);
    weight(p + ".out.w", {hidden, W}, proj_std);
    bias(p + ".out.b", W);
  }
  norm("lnf");
  for (int j = 0; j < cfg_.depth; ++j) {
    weight("head." + std::to_string(j) + ".w", {W, K}, std0);
    bias("head." + std::to_string(j) + ".b", K);
  }
  for (int k = 0; k < cfg_.schedule.count(); ++k) {
    weight("align." + std::to_string(k) + ".w", {W, cfg_.d_sem}, 1.0 / std::sqrt(static_cast<double>(W)));
    bias("align." + std::to_string(k) + ".b", cfg_.d_sem);
  }
}

template <class T>
Var<T> GjsaModel<T>::geo_tokens(num::BoundParams<T>& w, const std::vector<geotile::GeoCoord>& g) const {
  auto& graph = w.graph();
  const int E = cfg_.geo_dims;
  std::vector<double> emb;
  emb.reserve(g.size() * 2 * E);
  for (const auto& c : g) {
    const auto lat = sin_embed(c.lat_deg, E);
    const auto lon = sin_embed(geotile::normalize_lon(c.lon_deg), E);
    emb.insert(emb.end(), lat.begin(), lat.end());
    emb.insert(emb.end(), lon.begin(), lon.end());
  }
  auto x = graph.constant(to_tensor<T>({static_cast<std::int64_t>(g.size()), 2 * E}, emb));
  return linear(w, num::gelu(linear(w, x, "geo")), "geo2");
}

template <class T>
typename GjsaModel<T>::Outputs GjsaModel<T>::forward(num::BoundParams<T>& w, const JointBatch& batch) const {
  auto& graph = w.graph();
  const std::int64_t B = batch.size, S = batch.length, W = cfg_.width, N = B * S;
  if (static_cast<std::int64_t>(batch.inputs.size()) != N * cfg_.latent_dim) {
    throw ShapeError("forward: batch inputs do not match latent_dim");
  }

  // Per-slot content: projected input, or the null condition token.
  std::vector<double> keep(static_cast<std::size_t>(N * W), 1.0), dropped(static_cast<std::size_t>(N), 0.0);
  std::vector<double> place(static_cast<std::size_t>(N * B), 0.0);
  bool any_dropped = false;
  for (std::int64_t i = 0; i < N; ++i) {
    const auto& c = batch.cond[i / S];
    const bool geo_slot = batch.modality_ids[i] == 2;
    const bool nulled = !geo_slot && batch.modality_ids[i] == c.null_modality;
    if (geo_slot || nulled) std::fill_n(keep.begin() + i * W, W, 0.0);
    if (nulled) {
      dropped[i] = 1.0;
      any_dropped = true;
    }
    if (geo_slot) place[i * B + i / S] = 1.0;
  }
  auto content = linear(w, graph.constant(to_tensor<T>({N, cfg_.latent_dim}, batch.inputs)), "in");
  Var<T> x = num::mul(content, graph.constant(to_tensor<T>({N, W}, keep)));
  if (any_dropped) x = num::add(x, num::matmul(graph.constant(to_tensor<T>({N, 1}, dropped)), w("null.cond")));

  // Geo slot: c_g, or the null geo token.
  Var<T> geo = geo_tokens(w, batch.geo);
  std::vector<double> geo_keep(static_cast<std::size_t>(B * W), 1.0), geo_drop(static_cast<std::size_t>(B), 0.0);
  bool any_null_geo = false;
  for (std::int64_t b = 0; b < B; ++b) {
    if (batch.cond[b].null_geo) {
      std::fill_n(geo_keep.begin() + b * W, W, 0.0);
      geo_drop[b] = 1.0;
      any_null_geo = true;
    }
  }
  if (any_null_geo) {
    geo = num::add(num::mul(geo, graph.constant(to_tensor<T>({B, W}, geo_keep))),
                   num::matmul(graph.constant(to_tensor<T>({B, 1}, geo_drop)), w("null.geo")));
  }
  x = num::add(x, num::matmul(graph.constant(to_tensor<T>({N, B}, place)), geo));

  x = num::add(x, num::embedding_lookup(w("emb.scale"), std::span<const int>(batch.scale_ids)));
  x = num::add(x, num::embedding_lookup(w("emb.mod"), std::span<const int>(batch.modality_ids)));
  x = num::add(x, num::embedding_lookup(w("emb.pos"), std::span<const int>(batch.pos_ids)));

  for (int l = 0; l < cfg_.layers; ++l) {
    const auto p = "blk." + std::to_string(l);
    auto h = num::layer_norm(x, w(p + ".ln1.g"), w(p + ".ln1.b"));
    auto a = num::prefix_attention(linear(w, h, p + ".qkv"), cfg_.heads, std::span<const int>(batch.limits));
    x = num::add(x, linear(w, a, p + ".proj"));
    h = num::layer_norm(x, w(p + ".ln2.g"), w(p + ".ln2.b"));
    x = num::add(x, linear(w, num::gelu(linear(w, h, p + ".fc")), p + ".out"));
  }
  Outputs out;
  out.hidden = x;
  auto y = num::layer_norm(x, w("lnf.g"), w("lnf.b"));
  for (int j = 0; j < cfg_.depth; ++j) out.logits.push_back(linear(w, y, "head." + std::to_string(j)));

  for (const auto& lg : out.logits) {
    for (T v : lg.value().data) {
      if (!std::isfinite(v)) throw TrainingError("forward: non-finite logits");
    }
  }
  return out;
}

template <class T>
std::vector<Tensor<T>> GjsaModel<T>::logits(const JointBatch& batch) const {
  num::Graph<T> g(false);
  num::BoundParams<T> w(g, params_);
  auto out = forward(w, batch);
  std::vector<Tensor<T>> res;
  for (auto& v : out.logits) res.push_back(v.value());
  return res;
}

template <class T>
Var<T> loss_joint(const typename GjsaModel<T>::Outputs& out, const JointBatch& batch) {
  Var<T> total = num::cross_entropy(out.logits[0], std::span<const int>(batch.targets[0]));
  for (std::size_t j = 1; j < out.logits.size(); ++j) {
    total = num::add(total, num::cross_entropy(out.logits[j], std::span<const int>(batch.targets[j])));
  }
  return num::scale(total, T(1) / static_cast<T>(out.logits.size()));
}

template <class T>
Var<T> loss_semantic(num::BoundParams<T>& w, const ModelConfig& cfg, Var<T> hidden, const JointBatch& batch,
                     const std::vector<const SemanticTargets*>& targets) {
  auto& graph = w.graph();
  const auto& sched = cfg.schedule;
  if (static_cast<int>(targets.size()) != batch.size) throw ShapeError("loss_semantic: one target set per sequence");
  Var<T> total;
  for (int k = 0; k < sched.count(); ++k) {
    const auto& rows = batch.scale_rows[k];
    const std::int64_t per_item = 2LL * sched.area(k);
    if (static_cast<std::int64_t>(rows.size()) != per_item * batch.size) {
      throw ShapeError("loss_semantic: scale " + std::to_string(k) + " is not fully present in the batch");
    }
    std::vector<double> tgt;
    tgt.reserve(rows.size() * cfg.d_sem);
    for (const auto* t : targets) {
      const auto& v = t->scales.at(k);
      if (static_cast<std::int64_t>(v.size()) != per_item * cfg.d_sem) {
        throw ShapeError("loss_semantic: teacher targets for scale " + std::to_string(k) + " have the wrong size");
      }
      tgt.insert(tgt.end(), v.begin(), v.end());
    }
    auto h = num::embedding_lookup(hidden, std::span<const int>(rows));
    auto pred = linear(w, h, "align." + std::to_string(k));
    auto diff = num::sub(pred, graph.constant(to_tensor<T>({static_cast<std::int64_t>(rows.size()), cfg.d_sem}, tgt)));
    auto term = num::mean(num::mul(diff, diff));
    total = total.valid() ? num::add(total, term) : term;
  }
  return num::scale(total, T(1) / static_cast<T>(sched.count()));
}

template <class T>
LossParts<T> total_loss(const GjsaModel<T>& model, num::BoundParams<T>& w, const JointBatch& batch,
                        const std::vector<const SemanticTargets*>& targets) {
  auto out = model.forward(w, batch);
  LossParts<T> parts;
  parts.joint = loss_joint<T>(out, batch);
  parts.semantic = loss_semantic<T>(w, model.config(), out.hidden, batch, targets);
  parts.total = num::add(parts.joint, num::scale(parts.semantic, static_cast<T>(model.config().sigma)));
  return parts;
}

#define EMAP_INSTANTIATE_GJSA(T)                                                                                   \
  template class GjsaModel<T>;                                                                                     \
  template Var<T> loss_joint<T>(const GjsaModel<T>::Outputs&, const JointBatch&);                                  \
  template Var<T> loss_semantic<T>(num::BoundParams<T>&, const ModelConfig&, Var<T>, const JointBatch&,            \
                                   const std::vector<const SemanticTargets*>&);                                    \
  template LossParts<T> total_loss<T>(const GjsaModel<T>&, num::BoundParams<T>&, const JointBatch&,                \
                                      const std::vector<const SemanticTargets*>&);

EMAP_INSTANTIATE_GJSA(float)
EMAP_INSTANTIATE_GJSA(double)

}  // namespace emap::gjsa
