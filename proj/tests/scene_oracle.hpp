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

#pragma once

// Pinhole camera and ray casting written independently of the renderer,
// used to classify render pixels.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "envlight/render.hpp"

namespace envlight::testing {

struct OracleCamera {
  Vec3 pos, f, r, u;
  double tan_half;
  double aspect;
  int width, height;
};

inline Vec3 unit(const Vec3& v) { return v * (1.0 / norm(v)); }

inline OracleCamera oracle_camera(const SceneCamera& cam, int width, int height) {
  OracleCamera c;
  c.pos = cam.position;
  c.f = unit(cam.look_at - cam.position);
  Vec3 up{0.0, 1.0, 0.0};
  if (std::abs(c.f.y) > 1.0 - 1e-9) up = {0.0, 0.0, -1.0};
  c.r = unit(cross(c.f, up));
  c.u = cross(c.r, c.f);
  c.tan_half = std::tan(cam.vertical_fov / 2.0);
  c.aspect = static_cast<double>(width) / height;
  c.width = width;
  c.height = height;
  return c;
}

inline Vec3 pixel_ray(const OracleCamera& c, int i, int j) {
  const double ndc_x = (i + 0.5) / c.width * 2.0 - 1.0;
  const double ndc_y = 1.0 - (j + 0.5) / c.height * 2.0;
  return unit(c.f + (ndc_x * c.tan_half * c.aspect) * c.r + (ndc_y * c.tan_half) * c.u);
}

/// Pixel whose footprint contains the projection of `p`.
inline std::pair<int, int> project(const OracleCamera& c, const Vec3& p) {
  const Vec3 d = p - c.pos;
  const double z = dot(d, c.f);
  const double x = dot(d, c.r) / z / (c.tan_half * c.aspect);
  const double y = dot(d, c.u) / z / c.tan_half;
  return {static_cast<int>(std::floor((x + 1.0) / 2.0 * c.width)),
          static_cast<int>(std::floor((1.0 - y) / 2.0 * c.height))};
}

struct OracleHit {
  double t = std::numeric_limits<double>::infinity();
  int sphere = -2;  // -1 ground plane, -2 nothing
};

inline OracleHit cast(const SceneSpec& s, const Vec3& o, const Vec3& d, int skip = -3) {
  OracleHit h;
  for (int k = 0; k < static_cast<int>(s.spheres.size()); ++k) {
    if (k == skip) continue;
    const Vec3 oc = o - s.spheres[k].center;
    const double b = dot(oc, d);
    const double disc = b * b - (dot(oc, oc) - s.spheres[k].radius * s.spheres[k].radius);
    if (disc < 0.0) continue;
    const double t = -b - std::sqrt(disc);
    if (t > 1e-9 && t < h.t) h = {t, k};
  }
  if (skip != -1 && d.y < 0.0 && o.y > 0.0) {
    const double t = -o.y / d.y;
    if (t < h.t) h = {t, -1};
  }
  return h;
}

/// True when some other sphere reaches above the tangent plane at `p`, i.e.
/// its bounding cone overlaps the hemisphere around `n`.
inline bool hemisphere_occluded(const SceneSpec& s, const Vec3& p, const Vec3& n, int self,
                                double margin = 1e-6) {
  for (int k = 0; k < static_cast<int>(s.spheres.size()); ++k) {
    if (k == self) continue;
    const Vec3 to = s.spheres[k].center - p;
    const double dist = norm(to);
    const double half = std::asin(std::min(1.0, s.spheres[k].radius / dist));
    const double angle = std::acos(std::clamp(dot(to, n) / dist, -1.0, 1.0));
    if (angle < std::numbers::pi / 2.0 + half + margin) return true;
  }
  return false;
}

}  // namespace envlight::testing
