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

// Per-backend kernel entry points behind the dispatcher in dispatch.cpp.

#include "envlight/simd/kernels.hpp"

namespace envlight::simd {

struct KernelTable {
  void (*sg_lobe)(const DirectionsSoA&, const Vec3&, double, std::span<double>);
  void (*accumulate_lobe)(std::span<const double>, const Rgb&, const ChannelsSoA&);
  double (*residual)(const ConstChannelsSoA&, const ConstChannelsSoA&,
                     const ChannelsSoA&);
  LobeMoments (*lobe_moments)(std::span<const double>, const ConstChannelsSoA&,
                              const Rgb&, const DirectionsSoA&);
  GatherResult (*irradiance_gather)(const DirectionsSoA&, const ConstChannelsSoA&,
                                    std::span<const double>, const Vec3&,
                                    const Vec3&, std::span<const SphereOccluder>);
};

const KernelTable& scalar_kernels();
#if defined(ENVLIGHT_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

}  // namespace envlight::simd
