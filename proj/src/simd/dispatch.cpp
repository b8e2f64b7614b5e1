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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "envlight/errors.hpp"
#include "kernel_table.hpp"

namespace envlight::simd {
namespace {

const KernelTable& table_for(Backend backend) {
#if defined(ENVLIGHT_HAVE_AVX2)
  if (backend == Backend::kAvx2) return avx2_kernels();
#endif
  (void)backend;
  return scalar_kernels();
}

Backend initial_backend() {
  if (const char* forced = std::getenv("ENVLIGHT_SIMD")) {
    if (std::string_view(forced) == "scalar") return Backend::kScalar;
  }
  return avx2_supported() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

const KernelTable& active() { return table_for(current().load(std::memory_order_relaxed)); }

}  // namespace

bool avx2_supported() {
#if defined(ENVLIGHT_HAVE_AVX2)
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported;
#else
  return false;
#endif
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (backend == Backend::kAvx2 && !avx2_supported()) {
    throw DomainError("AVX2/FMA kernels are not available on this CPU");
  }
  current().store(backend, std::memory_order_relaxed);
}

const char* backend_name(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

void sg_lobe(const DirectionsSoA& dirs, const Vec3& axis, double inv_sigma2,
             std::span<double> out) {
  active().sg_lobe(dirs, axis, inv_sigma2, out);
}

void accumulate_lobe(std::span<const double> lobe, const Rgb& color,
                     const ChannelsSoA& model) {
  active().accumulate_lobe(lobe, color, model);
}

double residual(const ConstChannelsSoA& model, const ConstChannelsSoA& target,
                const ChannelsSoA& out) {
  return active().residual(model, target, out);
}

LobeMoments lobe_moments(std::span<const double> lobe, const ConstChannelsSoA& res,
                         const Rgb& color, const DirectionsSoA& dirs) {
  return active().lobe_moments(lobe, res, color, dirs);
}

GatherResult irradiance_gather(const DirectionsSoA& dirs,
                               const ConstChannelsSoA& weighted,
                               std::span<const double> solid_angle,
                               const Vec3& normal, const Vec3& origin,
                               std::span<const SphereOccluder> occluders) {
  return active().irradiance_gather(dirs, weighted, solid_angle, normal, origin,
                                    occluders);
}

}  // namespace envlight::simd
