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

#include <gtest/gtest.h>

#include "envlight/errors.hpp"
#include "envlight/simd/kernels.hpp"
#include "test_support.hpp"

namespace envlight {
namespace {

using namespace testing;
using simd::Backend;

struct Dirs {
  std::vector<double> x, y, z;
  simd::DirectionsSoA view() const { return {x, y, z}; }
};

Dirs random_dirs(Rng& rng, std::size_t n) {
  Dirs d;
  for (std::size_t i = 0; i < n; ++i) {
    const Direction v = random_direction(rng);
    d.x.push_back(v.x());
    d.y.push_back(v.y());
    d.z.push_back(v.z());
  }
  return d;
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng, lo, hi);
  return v;
}

class SimdEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!simd::avx2_supported()) GTEST_SKIP() << "CPU lacks AVX2/FMA";
  }
};

template <typename F>
auto on(Backend b, F&& f) {
  simd::ScopedBackend scope(b);
  return f();
}

// Sizes cover empty input, pure tails and mixed vector/tail loops.
constexpr std::size_t kSizes[] = {0, 1, 3, 4, 5, 7, 64, 1001};

TEST_F(SimdEquivalence, SgLobe) {
  Rng rng(1);
  for (std::size_t n : kSizes) {
    const Dirs d = random_dirs(rng, n);
    const Vec3 axis = random_direction(rng).vec();
    for (double inv_s2 : {0.1, 1.0, 25.0, 400.0, 1e4}) {
      std::vector<double> a(n), b(n);
      on(Backend::kScalar, [&] { simd::sg_lobe(d.view(), axis, inv_s2, a); return 0; });
      on(Backend::kAvx2, [&] { simd::sg_lobe(d.view(), axis, inv_s2, b); return 0; });
      for (std::size_t i = 0; i < n; ++i) {
        // The dot product rounds differently with FMA; that error is scaled
        // by inv_s2 in the exponent, and exp turns an absolute change in its
        // argument into a relative change of the result.
        const double rel = 1e-14 * (1.0 + std::abs(std::log(a[i]))) + 1e-15 * inv_s2;
        const double tol = a[i] > 0.0 ? rel * a[i] + 1e-300 : 1e-300;
        EXPECT_NEAR(a[i], b[i], tol) << "n=" << n << " i=" << i;
      }
    }
  }
}

TEST_F(SimdEquivalence, ExtremeArgumentsStayFinite) {
  Dirs d;
  for (double c : {-1.0, -0.5, 0.0, 1.0}) {
    d.x.push_back(std::sqrt(1 - c * c));
    d.y.push_back(0.0);
    d.z.push_back(c);
  }
  std::vector<double> a(4), b(4);
  on(Backend::kScalar, [&] { simd::sg_lobe(d.view(), {0, 0, 1}, 1e6, a); return 0; });
  on(Backend::kAvx2, [&] { simd::sg_lobe(d.view(), {0, 0, 1}, 1e6, b); return 0; });
  for (int i = 0; i < 4; ++i) {
    EXPECT_TRUE(std::isfinite(b[i]));
    EXPECT_GE(b[i], 0.0);
    EXPECT_NEAR(a[i], b[i], 1e-14 * a[i] + 1e-300);
  }
  EXPECT_EQ(b[3], 1.0);
}

TEST_F(SimdEquivalence, AccumulateAndResidual) {
  Rng rng(2);
  for (std::size_t n : kSizes) {
    const auto lobe = random_vec(rng, n, 0, 1);
    const auto tr = random_vec(rng, n, 0, 3), tg = random_vec(rng, n, 0, 3),
               tb = random_vec(rng, n, 0, 3);
    const Rgb color{1.3, 0.2, 2.1};
    auto run = [&](Backend be) {
      std::vector<double> mr(n, 0.5), mg(n, 0.25), mb(n, 0.0), rr(n), rg(n), rb(n);
      simd::ScopedBackend scope(be);
      simd::accumulate_lobe(lobe, color, {mr, mg, mb});
      const double sq = simd::residual({mr, mg, mb}, {tr, tg, tb}, {rr, rg, rb});
      return std::tuple{mr, rr, rb, sq};
    };
    const auto [mr_s, rr_s, rb_s, sq_s] = run(Backend::kScalar);
    const auto [mr_v, rr_v, rb_v, sq_v] = run(Backend::kAvx2);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(mr_s[i], mr_v[i], 1e-15 * std::abs(mr_s[i]) + 1e-300);
      EXPECT_NEAR(rr_s[i], rr_v[i], 1e-14);
      EXPECT_NEAR(rb_s[i], rb_v[i], 1e-14);
    }
    EXPECT_NEAR(sq_s, sq_v, 1e-13 * sq_s + 1e-300);
  }
}

TEST_F(SimdEquivalence, LobeMoments) {
  Rng rng(3);
  for (std::size_t n : kSizes) {
    const Dirs d = random_dirs(rng, n);
    const auto lobe = random_vec(rng, n, 0, 1);
    const auto rr = random_vec(rng, n, -1, 1), rg = random_vec(rng, n, -1, 1),
               rb = random_vec(rng, n, -1, 1);
    const Rgb color{0.7, 1.1, 0.4};
    const auto a = on(Backend::kScalar, [&] {
      return simd::lobe_moments(lobe, {rr, rg, rb}, color, d.view());
    });
    const auto b = on(Backend::kAvx2, [&] {
      return simd::lobe_moments(lobe, {rr, rg, rb}, color, d.view());
    });
    // Oracle for the scalar reference itself.
    double ch[3] = {0, 0, 0}, ax[3] = {0, 0, 0}, mag = 1e-300;
    for (std::size_t i = 0; i < n; ++i) {
      ch[0] += lobe[i] * rr[i];
      ch[1] += lobe[i] * rg[i];
      ch[2] += lobe[i] * rb[i];
      const double cr = color.r * rr[i] + color.g * rg[i] + color.b * rb[i];
      ax[0] += lobe[i] * cr * d.x[i];
      ax[1] += lobe[i] * cr * d.y[i];
      ax[2] += lobe[i] * cr * d.z[i];
      mag += lobe[i] * 3.0;
    }
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(a.by_channel[k], ch[k], 1e-13 * mag);
      EXPECT_NEAR(a.by_axis[k], ax[k], 1e-13 * mag);
      EXPECT_NEAR(a.by_channel[k], b.by_channel[k], 1e-13 * mag);
      EXPECT_NEAR(a.by_axis[k], b.by_axis[k], 1e-13 * mag);
    }
  }
}

TEST_F(SimdEquivalence, IrradianceGather) {
  Rng rng(4);
  for (std::size_t n : kSizes) {
    const Dirs d = random_dirs(rng, n);
    const auto wr = random_vec(rng, n, 0, 2), wg = random_vec(rng, n, 0, 2),
               wb = random_vec(rng, n, 0, 2), sa = random_vec(rng, n, 0.001, 0.01);
    const std::vector<simd::SphereOccluder> occ{{{1.5, 0.5, 0.0}, 0.8},
                                                {{-1.0, 1.0, 1.0}, 0.5},
                                                {{0.0, 3.0, 0.0}, 1.0}};
    const Vec3 normal = random_direction(rng).vec();
    for (std::size_t k : {0u, 1u, 3u}) {
      const std::span<const simd::SphereOccluder> o(occ.data(), k);
      const auto a = on(Backend::kScalar, [&] {
        return simd::irradiance_gather(d.view(), {wr, wg, wb}, sa, normal, {}, o);
      });
      const auto b = on(Backend::kAvx2, [&] {
        return simd::irradiance_gather(d.view(), {wr, wg, wb}, sa, normal, {}, o);
      });
      EXPECT_NEAR(a.radiance.r, b.radiance.r, 1e-13 * (1 + a.radiance.r));
      EXPECT_NEAR(a.radiance.g, b.radiance.g, 1e-13 * (1 + a.radiance.g));
      EXPECT_NEAR(a.radiance.b, b.radiance.b, 1e-13 * (1 + a.radiance.b));
      EXPECT_NEAR(a.cos_weight, b.cos_weight, 1e-13 * (1 + a.cos_weight));
    }
  }
}

TEST(SimdGather, OcclusionOracle) {
  // One direction straight up, one sphere directly above: blocked. Moving the
  // sphere sideways unblocks it.
  const std::vector<double> x{0.0}, y{1.0}, z{0.0}, w{1.0}, sa{1.0};
  const std::vector<simd::SphereOccluder> above{{{0, 5, 0}, 1.0}};
  const std::vector<simd::SphereOccluder> aside{{{3, 5, 0}, 1.0}};
  const std::vector<simd::SphereOccluder> below{{{0, -5, 0}, 1.0}};
  for (Backend be : {Backend::kScalar, Backend::kAvx2}) {
    if (be == Backend::kAvx2 && !simd::avx2_supported()) continue;
    simd::ScopedBackend scope(be);
    const auto g = [&](const auto& occ) {
      return simd::irradiance_gather({x, y, z}, {w, w, w}, sa, {0, 1, 0}, {}, occ);
    };
    EXPECT_EQ(g(above).radiance.r, 0.0);
    EXPECT_EQ(g(above).cos_weight, 1.0);
    EXPECT_EQ(g(aside).radiance.r, 1.0);
    EXPECT_EQ(g(below).radiance.r, 1.0);
  }
}

TEST(SimdDispatch, ScopedBackendRestores) {
  const Backend before = simd::active_backend();
  {
    simd::ScopedBackend scope(Backend::kScalar);
    EXPECT_EQ(simd::active_backend(), Backend::kScalar);
  }
  EXPECT_EQ(simd::active_backend(), before);
  EXPECT_STREQ(simd::backend_name(Backend::kScalar), "scalar");
  EXPECT_STREQ(simd::backend_name(Backend::kAvx2), "avx2");
  if (!simd::avx2_supported()) EXPECT_THROW(simd::set_backend(Backend::kAvx2), DomainError);
}

}  // namespace
}  // namespace envlight
