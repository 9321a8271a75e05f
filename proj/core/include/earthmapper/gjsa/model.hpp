// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "earthmapper/gjsa/config.hpp"
#include "earthmapper/gjsa/sequence.hpp"
#include "earthmapper/num/graph.hpp"
#include "earthmapper/num/params.hpp"

namespace emap::gjsa {

/// Which conditioning signals are replaced by their learned null tokens.
struct Conditioning {
  bool null_geo = false;
  int null_modality = -1;  // kSat, kMap or -1
  bool operator==(const Conditioning&) const = default;
};

/// Teacher features at every scale: scales[k] holds (modality, position)
/// rows of d_sem values, satellite rows first.
struct SemanticTargets {
  std::vector<std::vector<double>> scales;
};

/// Sequences stacked for one forward pass.
struct JointBatch {
  int size = 0;
  int length = 0;
  std::vector<int> limits;
  std::vector<int> scale_ids, modality_ids, pos_ids;
  std::vector<double> inputs;
  std::vector<std::vector<int>> targets;  // one row set per head
  std::vector<geotile::GeoCoord> geo;
  std::vector<Conditioning> cond;
  /// Per scale, batch rows of that scale ordered (item, modality, position).
  std::vector<std::vector<int>> scale_rows;
};

/// Throws ShapeError when the sequences do not share a layout.
JointBatch make_batch(const std::vector<const JointSequence*>& seqs, const std::vector<Conditioning>& cond,
                      const ModelConfig& cfg);

/// Pre-LN decoder over the joint sequence with blockwise-causal attention,
/// D classification heads and a per-scale alignment map into teacher space.
template <class T>
class GjsaModel {
 public:
  GjsaModel() = default;
  explicit GjsaModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  num::ParamSet<T>& params() { return params_; }
  const num::ParamSet<T>& params() const { return params_; }

  struct Outputs {
    std::vector<num::Var<T>> logits;  // per head, [size * length, vocab]
    num::Var<T> hidden;               // final block output, [size * length, width]
  };
  Outputs forward(num::BoundParams<T>& w, const JointBatch& batch) const;

  /// Coordinate token c_g for each coordinate, [n, width].
  num::Var<T> geo_tokens(num::BoundParams<T>& w, const std::vector<geotile::GeoCoord>& g) const;

  /// Gradient-free forward; per-head logits.
  std::vector<num::Tensor<T>> logits(const JointBatch& batch) const;

 private:
  ModelConfig cfg_;
  num::ParamSet<T> params_;
};

/// Mean cross-entropy over every predicted slot and head.
template <class T>
num::Var<T> loss_joint(const typename GjsaModel<T>::Outputs& out, const JointBatch& batch);

/// (1 / n_scales) sum_k mean squared error between align_k(hidden rows of
/// scale k) and the teacher targets, both modalities pooled (equal counts,
/// so this is the average of the per-modality losses).
template <class T>
num::Var<T> loss_semantic(num::BoundParams<T>& w, const ModelConfig& cfg, num::Var<T> hidden, const JointBatch& batch,
                          const std::vector<const SemanticTargets*>& targets);

template <class T>
struct LossParts {
  num::Var<T> joint;
  num::Var<T> semantic;
  num::Var<T> total;
};

/// joint + sigma * semantic, with sigma from the model config.
template <class T>
LossParts<T> total_loss(const GjsaModel<T>& model, num::BoundParams<T>& w, const JointBatch& batch,
                        const std::vector<const SemanticTargets*>& targets);

}  // namespace emap::gjsa
