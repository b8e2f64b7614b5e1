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

// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// is only entered after the dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <cmath>
#include <vector>

#include "kernel_table.hpp"

namespace envlight::simd {
namespace {

constexpr std::size_t kLanes = 4;

inline double hsum(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

// exp(x) for x in double precision: Cody-Waite reduction by ln2 followed by a
// degree-13 Taylor polynomial on |r| <= ln2/2 (truncation < 1e-17 relative).
// Inputs below -708 flush to zero like std::exp's underflow.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d n = _mm256_round_pd(
      _mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634074)),
      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);

  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);  // 1/13!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  const __m128i ni = _mm256_cvtpd_epi32(n);
  const __m256i bits = _mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(ni), _mm256_set1_epi64x(1023)), 52);
  const __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, result);
}

void sg_lobe_avx2(const DirectionsSoA& dirs, const Vec3& axis, double inv_sigma2,
                  std::span<double> out) {
  const std::size_t n = dirs.size();
  const std::size_t nv = n - n % kLanes;
  const __m256d ax = _mm256_set1_pd(axis.x);
  const __m256d ay = _mm256_set1_pd(axis.y);
  const __m256d az = _mm256_set1_pd(axis.z);
  const __m256d k = _mm256_set1_pd(inv_sigma2);
  const __m256d one = _mm256_set1_pd(1.0);
  for (std::size_t i = 0; i < nv; i += kLanes) {
    __m256d d = _mm256_mul_pd(_mm256_loadu_pd(&dirs.x[i]), ax);
    d = _mm256_fmadd_pd(_mm256_loadu_pd(&dirs.y[i]), ay, d);
    d = _mm256_fmadd_pd(_mm256_loadu_pd(&dirs.z[i]), az, d);
    _mm256_storeu_pd(&out[i], exp_pd(_mm256_mul_pd(k, _mm256_sub_pd(d, one))));
  }
  for (std::size_t i = nv; i < n; ++i) {
    const double d = dirs.x[i] * axis.x + dirs.y[i] * axis.y + dirs.z[i] * axis.z;
    out[i] = std::exp(inv_sigma2 * (d - 1.0));
  }
}

void accumulate_lobe_avx2(std::span<const double> lobe, const Rgb& color,
                          const ChannelsSoA& model) {
  const std::size_t n = lobe.size();
  const std::size_t nv = n - n % kLanes;
  const __m256d cr = _mm256_set1_pd(color.r);
  const __m256d cg = _mm256_set1_pd(color.g);
  const __m256d cb = _mm256_set1_pd(color.b);
  for (std::size_t i = 0; i < nv; i += kLanes) {
    const __m256d l = _mm256_loadu_pd(&lobe[i]);
    _mm256_storeu_pd(&model.r[i], _mm256_fmadd_pd(cr, l, _mm256_loadu_pd(&model.r[i])));
    _mm256_storeu_pd(&model.g[i], _mm256_fmadd_pd(cg, l, _mm256_loadu_pd(&model.g[i])));
    _mm256_storeu_pd(&model.b[i], _mm256_fmadd_pd(cb, l, _mm256_loadu_pd(&model.b[i])));
  }
  for (std::size_t i = nv; i < n; ++i) {
    model.r[i] += color.r * lobe[i];
    model.g[i] += color.g * lobe[i];
    model.b[i] += color.b * lobe[i];
  }
}

double residual_avx2(const ConstChannelsSoA& model, const ConstChannelsSoA& target,
                     const ChannelsSoA& out) {
  const std::size_t n = model.size();
  const std::size_t nv = n - n % kLanes;
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < nv; i += kLanes) {
    const __m256d r = _mm256_sub_pd(_mm256_loadu_pd(&model.r[i]), _mm256_loadu_pd(&target.r[i]));
    const __m256d g = _mm256_sub_pd(_mm256_loadu_pd(&model.g[i]), _mm256_loadu_pd(&target.g[i]));
    const __m256d b = _mm256_sub_pd(_mm256_loadu_pd(&model.b[i]), _mm256_loadu_pd(&target.b[i]));
    _mm256_storeu_pd(&out.r[i], r);
    _mm256_storeu_pd(&out.g[i], g);
    _mm256_storeu_pd(&out.b[i], b);
    acc = _mm256_fmadd_pd(r, r, acc);
    acc = _mm256_fmadd_pd(g, g, acc);
    acc = _mm256_fmadd_pd(b, b, acc);
  }
  double sum = hsum(acc);
  for (std::size_t i = nv; i < n; ++i) {
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

LobeMoments lobe_moments_avx2(std::span<const double> lobe,
                              const ConstChannelsSoA& res, const Rgb& color,
                              const DirectionsSoA& dirs) {
  const std::size_t n = lobe.size();
  const std::size_t nv = n - n % kLanes;
  const __m256d cr = _mm256_set1_pd(color.r);
  const __m256d cg = _mm256_set1_pd(color.g);
  const __m256d cb = _mm256_set1_pd(color.b);
  __m256d sr = _mm256_setzero_pd(), sg = _mm256_setzero_pd(), sb = _mm256_setzero_pd();
  __m256d sx = _mm256_setzero_pd(), sy = _mm256_setzero_pd(), sz = _mm256_setzero_pd();
  for (std::size_t i = 0; i < nv; i += kLanes) {
    const __m256d l = _mm256_loadu_pd(&lobe[i]);
    const __m256d gr = _mm256_mul_pd(l, _mm256_loadu_pd(&res.r[i]));
    const __m256d gg = _mm256_mul_pd(l, _mm256_loadu_pd(&res.g[i]));
    const __m256d gb = _mm256_mul_pd(l, _mm256_loadu_pd(&res.b[i]));
    sr = _mm256_add_pd(sr, gr);
    sg = _mm256_add_pd(sg, gg);
    sb = _mm256_add_pd(sb, gb);
    __m256d w = _mm256_mul_pd(cr, gr);
    w = _mm256_fmadd_pd(cg, gg, w);
    w = _mm256_fmadd_pd(cb, gb, w);
    sx = _mm256_fmadd_pd(w, _mm256_loadu_pd(&dirs.x[i]), sx);
    sy = _mm256_fmadd_pd(w, _mm256_loadu_pd(&dirs.y[i]), sy);
    sz = _mm256_fmadd_pd(w, _mm256_loadu_pd(&dirs.z[i]), sz);
  }
  LobeMoments m;
  m.by_channel[0] = hsum(sr);
  m.by_channel[1] = hsum(sg);
  m.by_channel[2] = hsum(sb);
  m.by_axis[0] = hsum(sx);
  m.by_axis[1] = hsum(sy);
  m.by_axis[2] = hsum(sz);
  for (std::size_t i = nv; i < n; ++i) {
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

GatherResult irradiance_gather_avx2(const DirectionsSoA& dirs,
                                    const ConstChannelsSoA& weighted,
                                    std::span<const double> solid_angle,
                                    const Vec3& normal, const Vec3& origin,
                                    std::span<const SphereOccluder> occluders) {
  const std::size_t n = dirs.size();
  const std::size_t nv = n - n % kLanes;
  const __m256d nx = _mm256_set1_pd(normal.x);
  const __m256d ny = _mm256_set1_pd(normal.y);
  const __m256d nz = _mm256_set1_pd(normal.z);
  const __m256d zero = _mm256_setzero_pd();

  // Per-occluder constants: origin relative to the center and the squared
  // distance past the surface.
  struct Rel {
    double ox, oy, oz, c;
  };
  Rel rel_stack[16];
  std::vector<Rel> rel_heap;
  Rel* rel = rel_stack;
  if (occluders.size() > 16) {
    rel_heap.resize(occluders.size());
    rel = rel_heap.data();
  }
  for (std::size_t s = 0; s < occluders.size(); ++s) {
    const Vec3 o = origin - occluders[s].center;
    rel[s] = {o.x, o.y, o.z, dot(o, o) - occluders[s].radius * occluders[s].radius};
  }

  __m256d ar = zero, ag = zero, ab = zero, aw = zero;
  for (std::size_t i = 0; i < nv; i += kLanes) {
    const __m256d dx = _mm256_loadu_pd(&dirs.x[i]);
    const __m256d dy = _mm256_loadu_pd(&dirs.y[i]);
    const __m256d dz = _mm256_loadu_pd(&dirs.z[i]);
    __m256d c = _mm256_mul_pd(dx, nx);
    c = _mm256_fmadd_pd(dy, ny, c);
    c = _mm256_fmadd_pd(dz, nz, c);
    const __m256d facing = _mm256_cmp_pd(c, zero, _CMP_GT_OQ);
    if (_mm256_movemask_pd(facing) == 0) continue;
    c = _mm256_and_pd(c, facing);
    aw = _mm256_fmadd_pd(_mm256_loadu_pd(&solid_angle[i]), c, aw);

    __m256d blocked = zero;
    for (std::size_t s = 0; s < occluders.size(); ++s) {
      __m256d b = _mm256_mul_pd(dx, _mm256_set1_pd(rel[s].ox));
      b = _mm256_fmadd_pd(dy, _mm256_set1_pd(rel[s].oy), b);
      b = _mm256_fmadd_pd(dz, _mm256_set1_pd(rel[s].oz), b);
      const __m256d ahead = _mm256_cmp_pd(b, zero, _CMP_LT_OQ);
      const __m256d close = _mm256_cmp_pd(_mm256_mul_pd(b, b),
                                          _mm256_set1_pd(rel[s].c), _CMP_GT_OQ);
      blocked = _mm256_or_pd(blocked, _mm256_and_pd(ahead, close));
      if (_mm256_movemask_pd(_mm256_andnot_pd(blocked, facing)) == 0) break;
    }
    const __m256d lit = _mm256_andnot_pd(blocked, c);
    ar = _mm256_fmadd_pd(_mm256_loadu_pd(&weighted.r[i]), lit, ar);
    ag = _mm256_fmadd_pd(_mm256_loadu_pd(&weighted.g[i]), lit, ag);
    ab = _mm256_fmadd_pd(_mm256_loadu_pd(&weighted.b[i]), lit, ab);
  }

  GatherResult out;
  out.radiance = {hsum(ar), hsum(ag), hsum(ab)};
  out.cos_weight = hsum(aw);
  for (std::size_t i = nv; i < n; ++i) {
    const double c = dirs.x[i] * normal.x + dirs.y[i] * normal.y + dirs.z[i] * normal.z;
    if (c <= 0.0) continue;
    out.cos_weight += solid_angle[i] * c;
    bool blocked = false;
    for (std::size_t s = 0; s < occluders.size() && !blocked; ++s) {
      const double b = rel[s].ox * dirs.x[i] + rel[s].oy * dirs.y[i] + rel[s].oz * dirs.z[i];
      blocked = b < 0.0 && b * b > rel[s].c;
    }
    if (blocked) continue;
    out.radiance.r += weighted.r[i] * c;
    out.radiance.g += weighted.g[i] * c;
    out.radiance.b += weighted.b[i] * c;
  }
  return out;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{sg_lobe_avx2, accumulate_lobe_avx2, residual_avx2,
                                 lobe_moments_avx2, irradiance_gather_avx2};
  return table;
}

}  // namespace envlight::simd
