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

// Data-parallel inner loops shared by the fitter and the renderer. Every
// kernel has a scalar reference implementation and an AVX2/FMA variant; the
// variant is picked once at startup from CPUID and can be overridden with
// set_backend() or the ENVLIGHT_SIMD environment variable ("scalar",
// "avx2"). Reductions use a fixed lane order, so results are reproducible
// for a given backend. Backends agree to ~1e-14 relative, not bit for bit.

#include <span>

#include "envlight/vec.hpp"

namespace envlight::simd {

enum class Backend { kScalar, kAvx2 };

bool avx2_supported();
Backend active_backend();
/// Throws DomainError when the CPU cannot run `backend`.
void set_backend(Backend backend);
const char* backend_name(Backend backend);

/// RAII override of the active backend, restoring the previous one on exit.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend) : previous_(active_backend()) {
    set_backend(backend);
  }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

/// Structure-of-arrays view over unit directions.
struct DirectionsSoA {
  std::span<const double> x;
  std::span<const double> y;
  std::span<const double> z;
  std::size_t size() const { return x.size(); }
};

struct ChannelsSoA {
  std::span<double> r;
  std::span<double> g;
  std::span<double> b;
  std::size_t size() const { return r.size(); }
};

struct ConstChannelsSoA {
  std::span<const double> r;
  std::span<const double> g;
  std::span<const double> b;
  std::size_t size() const { return r.size(); }
};

/// out[i] = exp(inv_sigma2 * (dot(dir_i, axis) - 1))
void sg_lobe(const DirectionsSoA& dirs, const Vec3& axis, double inv_sigma2,
             std::span<double> out);

/// model_ch[i] += color_ch * lobe[i]
void accumulate_lobe(std::span<const double> lobe, const Rgb& color,
                     const ChannelsSoA& model);

/// residual_ch[i] = model_ch[i] - target_ch[i]; returns the sum of squares.
double residual(const ConstChannelsSoA& model, const ConstChannelsSoA& target,
                const ChannelsSoA& out);

/// First moments of one lobe against the residual, the building blocks of the
/// analytic loss gradient:
///   by_channel[c] = sum_i lobe_i * res_c[i]
///   by_axis[a]    = sum_i lobe_i * dot(color, res_i) * dir_a[i]
struct LobeMoments {
  double by_channel[3] = {0, 0, 0};
  double by_axis[3] = {0, 0, 0};
};
LobeMoments lobe_moments(std::span<const double> lobe,
                         const ConstChannelsSoA& res, const Rgb& color,
                         const DirectionsSoA& dirs);

struct SphereOccluder {
  Vec3 center;
  double radius = 0.0;
};

struct GatherResult {
  Rgb radiance;             // sum over unblocked directions of L * dOmega * cos
  double cos_weight = 0.0;  // sum over all directions of dOmega * cos
};

/// Cosine-weighted hemisphere gather around `normal` from `origin`.
/// `weighted` holds radiance already multiplied by each direction's solid
/// angle. A direction counts as blocked when its ray from `origin` hits any
/// occluder; `origin` must lie outside every occluder.
GatherResult irradiance_gather(const DirectionsSoA& dirs,
                               const ConstChannelsSoA& weighted,
                               std::span<const double> solid_angle,
                               const Vec3& normal, const Vec3& origin,
                               std::span<const SphereOccluder> occluders);

}  // namespace envlight::simd
