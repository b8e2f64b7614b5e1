// Copyright 2026 The envlight Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scalar reference kernels. These define the semantics; the vector variants
// are tested against them.

#include <cmath>

#include "kernel_table.hpp"

namespace envlight::simd {
namespace {

void sg_lobe_ref(const DirectionsSoA& dirs, const Vec3& axis, double inv_sigma2,
                 std::span<double> out) {
  const std::size_t n = dirs.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = dirs.x[i] * axis.x + dirs.y[i] * axis.y + dirs.z[i] * axis.z;
    out[i] = std::exp(inv_sigma2 * (d - 1.0));
  }
}

void accumulate_lobe_ref(std::span<const double> lobe, const Rgb& color,
                         const ChannelsSoA& model) {
  for (std::size_t i = 0; i < lobe.size(); ++i) {
    model.r[i] += color.r * lobe[i];
    model.g[i] += color.g * lobe[i];
    model.b[i] += color.b * lobe[i];
  }
}

double residual_ref(const ConstChannelsSoA& model, const ConstChannelsSoA& target,
                    const ChannelsSoA& out) {
  double sum = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double r = model.r[i] - target.r[i];
    const double g = model.g[i] - target.g[i];
    const double b = model.b[i] - target.b[i];
    out.r[i] = r;
    out.g[i] = g;
    out.b[i] = b;
    sum += r * r + g * g + b * b;
  }
  return sum;
}

LobeMoments lobe_moments_ref(std::span<const double> lobe,
                             const ConstChannelsSoA& res, const Rgb& color,
                             const DirectionsSoA& dirs) {
  LobeMoments m;
  for (std::size_t i = 0; i < lobe.size(); ++i) {
    const double gr = lobe[i] * res.r[i];
    const double gg = lobe[i] * res.g[i];
    const double gb = lobe[i] * res.b[i];
    m.by_channel[0] += gr;
    m.by_channel[1] += gg;
    m.by_channel[2] += gb;
    const double w = color.r * gr + color.g * gg + color.b * gb;
    m.by_axis[0] += w * dirs.x[i];
    m.by_axis[1] += w * dirs.y[i];
    m.by_axis[2] += w * dirs.z[i];
  }
  return m;
}

GatherResult irradiance_gather_ref(const DirectionsSoA& dirs,
                                   const ConstChannelsSoA& weighted,
                                   std::span<const double> solid_angle,
                                   const Vec3& normal, const Vec3& origin,
                                   std::span<const SphereOccluder> occluders) {
  GatherResult out;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const double c =
        dirs.x[i] * normal.x + dirs.y[i] * normal.y + dirs.z[i] * normal.z;
    if (c <= 0.0) continue;
    out.cos_weight += solid_angle[i] * c;
    bool blocked = false;
    for (const SphereOccluder& s : occluders) {
      const double ox = origin.x - s.center.x;
      const double oy = origin.y - s.center.y;
      const double oz = origin.z - s.center.z;
      const double b = ox * dirs.x[i] + oy * dirs.y[i] + oz * dirs.z[i];
      const double cc = ox * ox + oy * oy + oz * oz - s.radius * s.radius;
      if (b < 0.0 && b * b > cc) {
        blocked = true;
        break;
      }
    }
    if (blocked) continue;
    out.radiance.r += weighted.r[i] * c;
    out.radiance.g += weighted.g[i] * c;
    out.radiance.b += weighted.b[i] * c;
  }
  return out;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{sg_lobe_ref, accumulate_lobe_ref, residual_ref,
                                 lobe_moments_ref, irradiance_gather_ref};
  return table;
}

}  // namespace envlight::simd
