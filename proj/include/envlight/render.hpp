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

// Deterministic image-based-lighting renderer for the evaluation scenes:
// spheres resting on an infinite ground plane (y = 0), lit only by an
// environment map. Diffuse shading gathers a downsampled copy of the map
// over the hemisphere. Plane gathers test every sphere for visibility, which
// is what casts the shadows; sphere gathers do so only with
// RenderConfig::sphere_shadows. There is no interreflection between diffuse
// surfaces: a gathered direction either escapes to the environment or is
// black.

#include <span>
#include <string_view>
#include <vector>

#include "envlight/image.hpp"
#include "envlight/simd/kernels.hpp"
#include "envlight/vec.hpp"

namespace envlight {

enum class MaterialKind { kDiffuse, kMirror, kGlossy };

struct Material {
  MaterialKind kind = MaterialKind::kDiffuse;
  Rgb albedo{0.8, 0.8, 0.8};
  double glossy_exponent = 50.0;
};

struct Sphere {
  Vec3 center;
  double radius = 1.0;
  Material material;
};

struct SceneCamera {
  Vec3 position;
  Vec3 look_at;
  double vertical_fov = 0.7853981633974483;  // radians
};

struct SceneSpec {
  std::vector<Sphere> spheres;
  Rgb plane_albedo{0.8, 0.8, 0.8};
  SceneCamera camera;

  void validate() const;
};

/// "spheres9_top" or "spheres3_front"; NotFoundError otherwise.
SceneSpec preset_scene(std::string_view name);

struct RenderConfig {
  int width = 128;
  int height = 128;
  int shade_env_height = 32;
  int mirror_depth = 2;
  double exposure = 1.0;
  double gamma = 2.2;
  /// Diffuse spheres are shaded without occlusion by the other spheres
  /// unless this is set; the ground plane is always shadowed.
  bool sphere_shadows = false;

  void validate() const;
};

/// Downsampled environment prepared for hemisphere gathers: pixel-center
/// directions, solid angles and radiance * solid angle, all as SoA.
class ShadingEnv {
 public:
  ShadingEnv(const EnvMap& env, int shade_height);

  simd::DirectionsSoA directions() const { return {x_, y_, z_}; }
  simd::ConstChannelsSoA weighted_radiance() const { return {wr_, wg_, wb_}; }
  std::span<const double> solid_angles() const { return solid_angle_; }

 private:
  std::vector<double> x_, y_, z_, wr_, wg_, wb_, solid_angle_;
};

/// Lambertian shading factor at `origin` with surface normal `normal`:
/// sum of L * cos * dOmega over unblocked directions divided by sum of
/// cos * dOmega over the whole hemisphere. The normalization replaces the
/// analytic 1/pi so a constant environment is reproduced exactly at any
/// gather resolution. Multiply by albedo for outgoing radiance.
Rgb diffuse_irradiance(const ShadingEnv& env, const Vec3& normal, const Vec3& origin,
                       std::span<const simd::SphereOccluder> occluders = {});
Rgb diffuse_irradiance(const EnvMap& env, const Direction& normal,
                       int shade_env_height = 32);

/// One primary ray per pixel center; returns linear HDR radiance.
Image render_scene(const EnvMap& env, const SceneSpec& scene, const RenderConfig& cfg);

/// clamp(exposure * x, 0, 1)^(1/gamma) per channel.
Image tonemap(const Image& hdr, double exposure, double gamma);

}  // namespace envlight
