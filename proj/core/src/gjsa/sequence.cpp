// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/gjsa/sequence.hpp"

#include <cmath>
#include <string>

#include "earthmapper/common/error.hpp"

namespace emap::gjsa {

std::vector<double> sin_embed(double v, int dims) {
  if (dims <= 0 || dims % 2 != 0) throw ConfigError("sin_embed: dims must be positive and even, got " + std::to_string(dims));
  std::vector<double> out(static_cast<std::size_t>(dims));
  for (int i = 0; i < dims / 2; ++i) {
    const double f = std::pow(10000.0, -2.0 * i / dims);
    out[2 * i] = std::sin(v * f);
    out[2 * i + 1] = std::cos(v * f);
  }
  return out;
}

int sequence_length(const hrq::ScaleSchedule& sched) { return 1 + 2 * sched.total_positions(); }

int slot_index(const hrq::ScaleSchedule& sched, int k, int modality, int pos) {
  return 1 + 2 * sched.offset(k) + modality * sched.area(k) + pos;
}

std::vector<Slot> joint_layout(const hrq::ScaleSchedule& sched, int last) {
  if (last < 0 || last >= sched.count()) last = sched.count() - 1;
  std::vector<Slot> slots{{-1, -1, 0}};
  for (int k = 0; k <= last; ++k) {
    for (int m = 0; m < 2; ++m) {
      for (int p = 0; p < sched.area(k); ++p) slots.push_back({k, m, p});
    }
  }
  return slots;
}

std::vector<int> key_limits(const std::vector<Slot>& slots) {
  const int n = static_cast<int>(slots.size());
  std::vector<int> limits(n);
  int end = n;
  for (int i = n - 1; i >= 0; --i) {
    if (i + 1 < n && slots[i].scale != slots[i + 1].scale) end = i + 1;
    if (i + 1 < n && slots[i].scale > slots[i + 1].scale) throw ShapeError("key_limits: slots not grouped by scale");
    limits[i] = slots[i].scale < 0 ? i + 1 : end;
  }
  return limits;
}

bool attends(const std::vector<Slot>& slots, int query, int key) {
  if (slots[query].scale < 0) return key == query;
  return slots[key].scale <= slots[query].scale;
}

namespace {

JointSequence assemble(const hrq::TokenMap& sat, const hrq::TokenMap& map, const geotile::GeoCoord& g,
                       const hrq::Codebook& cb, const hrq::ScaleSchedule& sched, int last, bool with_targets) {
  if (sat.depth != map.depth || sat.scales.size() != map.scales.size() ||
      static_cast<int>(sat.scales.size()) != sched.count()) {
    throw ShapeError("joint sequence: token maps do not share the schedule (" + std::to_string(sat.scales.size()) +
                     " and " + std::to_string(map.scales.size()) + " scales for a " +
                     std::to_string(sched.count()) + "-scale schedule)");
  }
  for (int k = 0; k < sched.count(); ++k) {
    const auto need = static_cast<std::size_t>(sched.area(k)) * sat.depth;
    const bool required = with_targets || k < last;
    if (required && (sat.scales[k].size() != need || map.scales[k].size() != need)) {
      throw ShapeError("joint sequence: scale " + std::to_string(k) + " holds the wrong number of tokens");
    }
  }
  JointSequence seq;
  seq.geo = g;
  seq.slots = joint_layout(sched, last);
  seq.latent_dim = cb.d;
  seq.depth = sat.depth;
  seq.inputs.assign(seq.slots.size() * cb.d, 0.0);
  seq.targets.assign(seq.slots.size() * sat.depth, -1);
  const hrq::TokenMap* tms[2] = {&sat, &map};
  for (int m = 0; m < 2; ++m) {
    for (int k = 0; k <= last; ++k) {
      const auto acc = hrq::accumulated_input(*tms[m], cb, sched, k);
      for (int p = 0; p < sched.area(k); ++p) {
        const int s = slot_index(sched, k, m, p);
        std::copy_n(acc.data.begin() + static_cast<std::ptrdiff_t>(p) * cb.d, cb.d,
                    seq.inputs.begin() + static_cast<std::ptrdiff_t>(s) * cb.d);
        if (with_targets) {
          for (int j = 0; j < sat.depth; ++j) seq.targets[s * sat.depth + j] = tms[m]->at(k, p, j);
        }
      }
    }
  }
  return seq;
}

}  // namespace

JointSequence build_joint_sequence(const hrq::TokenMap& sat, const hrq::TokenMap& map, const geotile::GeoCoord& g,
                                   const hrq::Codebook& cb, const hrq::ScaleSchedule& sched) {
  hrq::validate(sat, sched, cb.K);
  hrq::validate(map, sched, cb.K);
  return assemble(sat, map, g, cb, sched, sched.count() - 1, true);
}

JointSequence build_prefix(const hrq::TokenMap& sat, const hrq::TokenMap& map, const geotile::GeoCoord& g,
                           const hrq::Codebook& cb, const hrq::ScaleSchedule& sched, int last) {
  if (last < 0 || last >= sched.count()) throw ShapeError("build_prefix: scale " + std::to_string(last) + " out of range");
  return assemble(sat, map, g, cb, sched, last, false);
}

}  // namespace emap::gjsa
