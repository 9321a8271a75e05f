// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "earthmapper/geotile/projection.hpp"
#include "earthmapper/hrq/codebook.hpp"
#include "earthmapper/hrq/multiscale.hpp"

namespace emap::gjsa {

inline constexpr int kSat = 0;
inline constexpr int kMap = 1;

/// Interleaved [sin(v f_0), cos(v f_0), sin(v f_1), ...] with
/// f_i = 10000^(-2i / dims). Throws ConfigError for odd or non-positive dims.
std::vector<double> sin_embed(double v, int dims);

struct Slot {
  int scale = -1;  // -1 marks the geo slot
  int modality = -1;
  int pos = 0;
  bool operator==(const Slot&) const = default;
};

/// One sequence in slot order: the geo slot, then per scale the satellite
/// block followed by the map block.
struct JointSequence {
  geotile::GeoCoord geo;
  std::vector<Slot> slots;
  int latent_dim = 0;
  int depth = 0;
  /// slots x latent_dim: accumulated coarser-scale reconstruction feeding
  /// each slot; zero for the geo slot and at the first scale.
  std::vector<double> inputs;
  /// slots x depth token targets; -1 where nothing is predicted.
  std::vector<int> targets;

  int length() const { return static_cast<int>(slots.size()); }
};

/// 1 + 2 * sum_k h_k w_k.
int sequence_length(const hrq::ScaleSchedule& sched);
int slot_index(const hrq::ScaleSchedule& sched, int k, int modality, int pos);
/// Slots of the full layout, or of the prefix through scale `last`.
std::vector<Slot> joint_layout(const hrq::ScaleSchedule& sched, int last = -1);

/// Exclusive end of the keys each slot may attend to. The geo slot sees only
/// itself; a slot at scale k sees the geo slot and every slot of scale <= k.
/// Slots must be grouped in non-decreasing scale order.
std::vector<int> key_limits(const std::vector<Slot>& slots);
bool attends(const std::vector<Slot>& slots, int query, int key);

/// Teacher-forcing sequence for a tokenized pair. Throws ShapeError when the
/// token maps do not fit the schedule.
JointSequence build_joint_sequence(const hrq::TokenMap& sat, const hrq::TokenMap& map, const geotile::GeoCoord& g,
                                   const hrq::Codebook& cb, const hrq::ScaleSchedule& sched);

/// Inference prefix through scale `last`; only scales < last of the token maps
/// are read. Targets are all -1.
JointSequence build_prefix(const hrq::TokenMap& sat, const hrq::TokenMap& map, const geotile::GeoCoord& g,
                           const hrq::Codebook& cb, const hrq::ScaleSchedule& sched, int last);

}  // namespace emap::gjsa
