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

#include "envlight/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "envlight/geometry.hpp"
#include "envlight/parallel.hpp"

namespace envlight {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRayEpsilon = 1e-7;
constexpr double kSurfaceOffset = 1e-6;
constexpr int kGlossyGrid = 8;  // 8 x 8 = 64 lobe samples

Material gray(MaterialKind kind, double albedo) {
  return {kind, {albedo, albedo, albedo}, 50.0};
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int sphere = -1;  // -1 with finite t means the ground plane
  bool valid() const { return std::isfinite(t); }
};

struct Basis {
  Vec3 forward, right, up;
};

Basis camera_basis(const SceneCamera& cam) {
  const Vec3 f = Direction::normalize(cam.look_at - cam.position).vec();
  Vec3 world_up{0.0, 1.0, 0.0};
  if (std::abs(dot(f, world_up)) > 1.0 - 1e-9) world_up = {0.0, 0.0, -1.0};
  const Vec3 r = Direction::normalize(cross(f, world_up)).vec();
  return {f, r, cross(r, f)};
}

// Phong lobe samples around +z, importance-sampled so every sample carries
// equal weight: cos(alpha) = u^(1/(n+1)).
std::array<Vec3, kGlossyGrid * kGlossyGrid> phong_samples(double exponent) {
  std::array<Vec3, kGlossyGrid * kGlossyGrid> s{};
  for (int i = 0; i < kGlossyGrid; ++i) {
    for (int j = 0; j < kGlossyGrid; ++j) {
      const double u = (i + 0.5) / kGlossyGrid;
      const double v = (j + 0.5) / kGlossyGrid;
      const double ca = std::pow(u, 1.0 / (exponent + 1.0));
      const double sa = std::sqrt(std::max(0.0, 1.0 - ca * ca));
      const double phi = 2.0 * kPi * v;
      s[i * kGlossyGrid + j] = {sa * std::cos(phi), sa * std::sin(phi), ca};
    }
  }
  return s;
}

class Tracer {
 public:
  Tracer(const EnvMap& env, const SceneSpec& scene, const RenderConfig& cfg)
      : env_(env), scene_(scene), cfg_(cfg), shading_(env, cfg.shade_env_height) {
    for (const Sphere& s : scene.spheres) occluders_.push_back({s.center, s.radius});
    for (const Sphere& s : scene.spheres) {
      if (s.material.kind == MaterialKind::kGlossy) {
        glossy_ = phong_samples(s.material.glossy_exponent);
        glossy_exponent_ = s.material.glossy_exponent;
        break;
      }
    }
  }

  Rgb trace(const Vec3& origin, const Vec3& dir, int depth) const {
    const Hit hit = intersect(origin, dir);
    if (!hit.valid()) return sample_direction(env_, dir);
    const Vec3 p = origin + hit.t * dir;
    if (hit.sphere < 0) {
      const Vec3 n{0.0, 1.0, 0.0};
      return scene_.plane_albedo *
             diffuse_irradiance(shading_, n, p + kSurfaceOffset * n, occluders_);
    }
    const Sphere& s = scene_.spheres[hit.sphere];
    const Vec3 n = (p - s.center) * (1.0 / s.radius);
    const Vec3 lifted = p + kSurfaceOffset * n;
    switch (s.material.kind) {
      case MaterialKind::kDiffuse:
        return s.material.albedo *
               diffuse_irradiance(shading_, n, lifted,
                                  cfg_.sphere_shadows
                                      ? others(hit.sphere)
                                      : std::span<const simd::SphereOccluder>{});
      case MaterialKind::kMirror: {
        const Vec3 r = dir - 2.0 * dot(dir, n) * n;
        return s.material.albedo * follow(lifted, r, depth);
      }
      case MaterialKind::kGlossy:
        return s.material.albedo * glossy(lifted, dir, n, depth, s.material.glossy_exponent);
    }
    return {};
  }

 private:
  Rgb follow(const Vec3& origin, const Vec3& dir, int depth) const {
    if (depth < cfg_.mirror_depth) return trace(origin, dir, depth + 1);
    return sample_direction(env_, dir);
  }

  Rgb glossy(const Vec3& origin, const Vec3& dir, const Vec3& n, int depth,
             double exponent) const {
    const auto samples = exponent == glossy_exponent_ ? glossy_ : phong_samples(exponent);
    const Vec3 r = Direction::normalize(dir - 2.0 * dot(dir, n) * n).vec();
    const Vec3 helper = std::abs(r.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    const Vec3 t = Direction::normalize(cross(helper, r)).vec();
    const Vec3 b = cross(r, t);
    Rgb acc;
    for (const Vec3& s : samples) {
      const Vec3 w = s.x * t + s.y * b + s.z * r;
      if (dot(w, n) <= 0.0) continue;
      acc += follow(origin, w, depth);
    }
    return acc * (1.0 / static_cast<double>(samples.size()));
  }

  std::span<const simd::SphereOccluder> others(int self) const {
    thread_local std::vector<simd::SphereOccluder> buf;
    buf.clear();
    for (int i = 0; i < static_cast<int>(occluders_.size()); ++i) {
      if (i != self) buf.push_back(occluders_[i]);
    }
    return buf;
  }

  Hit intersect(const Vec3& o, const Vec3& d) const {
    Hit best;
    for (int i = 0; i < static_cast<int>(scene_.spheres.size()); ++i) {
      const Sphere& s = scene_.spheres[i];
      const Vec3 oc = o - s.center;
      const double b = dot(oc, d);
      const double c = dot(oc, oc) - s.radius * s.radius;
      const double disc = b * b - c;
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      double t = -b - sq;
      if (t <= kRayEpsilon) t = -b + sq;
      if (t > kRayEpsilon && t < best.t) {
        best.t = t;
        best.sphere = i;
      }
    }
    if (d.y < 0.0 && o.y > 0.0) {
      const double t = -o.y / d.y;
      if (t > kRayEpsilon && t < best.t) {
        best.t = t;
        best.sphere = -1;
      }
    }
    return best;
  }

  const EnvMap& env_;
  const SceneSpec& scene_;
  const RenderConfig& cfg_;
  ShadingEnv shading_;
  std::vector<simd::SphereOccluder> occluders_;
  std::array<Vec3, kGlossyGrid * kGlossyGrid> glossy_{};
  double glossy_exponent_ = -1.0;
};

}  // namespace

void SceneSpec::validate() const {
  for (const Sphere& s : spheres) {
    if (!(s.radius > 0.0)) throw ValidationError("sphere radius must be positive", "radius");
    for (double a : {s.material.albedo.r, s.material.albedo.g, s.material.albedo.b}) {
      if (!(a >= 0.0 && a <= 1.0)) {
        throw ValidationError("albedo channels must lie in [0, 1]", "albedo");
      }
    }
    if (s.material.kind == MaterialKind::kGlossy && !(s.material.glossy_exponent > 0.0)) {
      throw ValidationError("glossy exponent must be positive", "glossy_exponent");
    }
  }
  if (!(camera.vertical_fov > 0.0 && camera.vertical_fov < kPi)) {
    throw DomainError("camera vertical fov must lie in (0, pi)");
  }
}

SceneSpec preset_scene(std::string_view name) {
  SceneSpec scene;
  if (name == "spheres9_top") {
    for (int row = -1; row <= 1; ++row) {
      for (int col = -1; col <= 1; ++col) {
        scene.spheres.push_back(
            {{2.0 * col, 0.8, 2.0 * row}, 0.8, gray(MaterialKind::kDiffuse, 0.8)});
      }
    }
    scene.camera = {{0.0, 10.0, 0.0}, {0.0, 0.0, 0.0}, 45.0 * kPi / 180.0};
    return scene;
  }
  if (name == "spheres3_front") {
    scene.spheres.push_back({{-2.2, 1.0, 0.0}, 1.0, gray(MaterialKind::kDiffuse, 0.8)});
    scene.spheres.push_back({{0.0, 1.0, 0.0}, 1.0, gray(MaterialKind::kMirror, 0.95)});
    scene.spheres.push_back({{2.2, 1.0, 0.0}, 1.0, gray(MaterialKind::kGlossy, 0.8)});
    scene.camera = {{0.0, 1.5, 6.0}, {0.0, 0.0, 0.0}, 60.0 * kPi / 180.0};
    return scene;
  }
  throw NotFoundError("unknown scene preset '" + std::string(name) + "'");
}

void RenderConfig::validate() const {
  if (width < 1 || height < 1) throw ValidationError("render size must be positive", "width");
  if (shade_env_height < 1) {
    throw ValidationError("shade_env_height must be positive", "shade_env_height");
  }
  if (mirror_depth < 1) throw ValidationError("mirror_depth must be positive", "mirror_depth");
  if (!(exposure > 0.0)) throw ValidationError("exposure must be positive", "exposure");
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive", "gamma");
}

ShadingEnv::ShadingEnv(const EnvMap& env, int shade_height) {
  const EnvMap small = resample(env, shade_height);
  const int h = small.height();
  const int w = small.width();
  const std::vector<double> omega = solid_angle_map(h, w);
  const std::size_t n = small.pixel_count();
  for (auto* v : {&x_, &y_, &z_, &wr_, &wg_, &wb_}) v->resize(n);
  solid_angle_ = omega;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const Direction d = pixel_center_direction(x, y, h, w);
      x_[i] = d.x();
      y_[i] = d.y();
      z_[i] = d.z();
      const Rgb c = small.at(x, y);
      wr_[i] = c.r * omega[i];
      wg_[i] = c.g * omega[i];
      wb_[i] = c.b * omega[i];
    }
  }
}

Rgb diffuse_irradiance(const ShadingEnv& env, const Vec3& normal, const Vec3& origin,
                       std::span<const simd::SphereOccluder> occluders) {
  const simd::GatherResult g =
      simd::irradiance_gather(env.directions(), env.weighted_radiance(),
                              env.solid_angles(), normal, origin, occluders);
  if (!(g.cos_weight > 0.0)) return {};
  return g.radiance * (1.0 / g.cos_weight);
}

Rgb diffuse_irradiance(const EnvMap& env, const Direction& normal, int shade_env_height) {
  const ShadingEnv shading(env, shade_env_height);
  return diffuse_irradiance(shading, normal.vec(), Vec3{});
}

Image render_scene(const EnvMap& env, const SceneSpec& scene, const RenderConfig& cfg) {
  scene.validate();
  cfg.validate();
  const Tracer tracer(env, scene, cfg);
  const Basis basis = camera_basis(scene.camera);
  const double tan_half = std::tan(0.5 * scene.camera.vertical_fov);
  const double aspect = static_cast<double>(cfg.width) / cfg.height;

  Image out(cfg.width, cfg.height);
  parallel_for(cfg.height, [&](int j) {
    for (int i = 0; i < cfg.width; ++i) {
      const double sx = (2.0 * (i + 0.5) / cfg.width - 1.0) * tan_half * aspect;
      const double sy = (1.0 - 2.0 * (j + 0.5) / cfg.height) * tan_half;
      const Vec3 d =
          Direction::normalize(basis.forward + sx * basis.right + sy * basis.up).vec();
      out.set(i, j, tracer.trace(scene.camera.position, d, 0));
    }
  });
  return out;
}

Image tonemap(const Image& hdr, double exposure, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  Image out(hdr.width(), hdr.height());
  const auto in = hdr.data();
  auto o = out.data();
  const double inv_gamma = 1.0 / gamma;
  for (std::size_t i = 0; i < in.size(); ++i) {
    o[i] = std::pow(std::clamp(exposure * in[i], 0.0, 1.0), inv_gamma);
  }
  return out;
}

}  // namespace envlight
