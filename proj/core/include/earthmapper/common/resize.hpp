// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

namespace emap {

/// Separable bilinear (triangle-filter) resampling of an interleaved h x w x c
/// grid with half-pixel centers. When shrinking, the triangle support widens
/// by the scale factor so every source sample contributes (antialiased
/// bilinear, as in PIL); when enlarging it is ordinary bilinear interpolation
/// with edge clamping. Same-size resize is the identity.
std::vector<double> resize_bilinear(std::span<const double> src, int src_h, int src_w, int channels, int dst_h,
                                    int dst_w);

}  // namespace emap
