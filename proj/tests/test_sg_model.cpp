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
#include "envlight/geometry.hpp"
#include "envlight/sg_model.hpp"
#include "test_support.hpp"

namespace envlight {
namespace {

using namespace testing;

Rgb oracle_eval(const SgSet& set, const Vec3& w) {
  Rgb sum;
  for (const auto& e : set.entries()) {
    const Vec3 a = e.light.direction.vec();
    const double s = e.light.sigma;
    const double g = std::exp(-(1.0 - (w.x * a.x + w.y * a.y + w.z * a.z)) / (s * s));
    sum = sum + g * e.light.color;
  }
  return sum;
}

TEST(GaussianKernel, Anchors) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Direction d = random_direction(rng);
    EXPECT_EQ(gaussian_kernel(d, d, uniform(rng, 0.01, 3.0)), 1.0);
  }
  const Direction x = Direction::normalize({1, 0, 0});
  const Direction z = Direction::normalize({0, 0, 1});
  EXPECT_NEAR(gaussian_kernel(x, z, 1.0), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(gaussian_kernel(x, z, 0.45), std::exp(-1.0 / (0.45 * 0.45)), 1e-15);
  EXPECT_NEAR(gaussian_kernel(x, z, 0.45), 7.16e-3, 1e-5);
  EXPECT_THROW(gaussian_kernel(x, z, 0.0), DomainError);
  EXPECT_THROW(gaussian_kernel(x, z, -1.0), DomainError);
}

TEST(EvalSg, Anchors) {
  const Direction z = Direction::normalize({0, 0, 1});
  EXPECT_EQ(eval_sg(SgSet{}, z), (Rgb{0, 0, 0}));
  SgSet one;
  one.add({{2, 1, 0}, z, 0.3});
  EXPECT_EQ(eval_sg(one, z), (Rgb{2, 1, 0}));
  SgSet two = one;
  two.add({{2, 1, 0}, z, 0.3});
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Direction w = random_direction(rng);
    const Rgb a = eval_sg(one, w);
    const Rgb b = eval_sg(two, w);
    EXPECT_EQ(b.r, 2.0 * a.r);
    EXPECT_EQ(b.g, 2.0 * a.g);
    EXPECT_EQ(b.b, 2.0 * a.b);
  }
}

TEST(EvalSg, LinearInTheSet) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const SgSet a = random_set(rng, 1 + i % 4);
    const SgSet b = random_set(rng, 1 + i % 3);
    SgSet both = a;
    for (const auto& e : b.entries()) both.add(e.light);
    const Direction w = random_direction(rng);
    const Rgb lhs = eval_sg(both, w);
    const Rgb rhs = eval_sg(a, w) + eval_sg(b, w);
    EXPECT_NEAR(lhs.r, rhs.r, 1e-12 * std::max(1.0, std::abs(rhs.r)));
    EXPECT_NEAR(lhs.g, rhs.g, 1e-12 * std::max(1.0, std::abs(rhs.g)));
    EXPECT_NEAR(lhs.b, rhs.b, 1e-12 * std::max(1.0, std::abs(rhs.b)));
  }
}

TEST(EvalSg, BoundedByColorSum) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const SgSet s = random_set(rng, 3);
    Rgb total;
    for (const auto& e : s.entries()) total = total + e.light.color;
    const Rgb v = eval_sg(s, random_direction(rng));
    EXPECT_LE(v.r, total.r);
    EXPECT_LE(v.g, total.g);
    EXPECT_LE(v.b, total.b);
  }
}

TEST(EvalSg, MatchesOracle) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const SgSet s = random_set(rng, 4);
    const Direction w = random_direction(rng);
    const Rgb a = eval_sg(s, w);
    const Rgb b = oracle_eval(s, w.vec());
    EXPECT_NEAR(a.r, b.r, 1e-13);
    EXPECT_NEAR(a.g, b.g, 1e-13);
    EXPECT_NEAR(a.b, b.b, 1e-13);
  }
}

TEST(RenderSgMap, EmptySetIsZero) {
  const EnvMap m = render_sg_map(SgSet{}, 16);
  EXPECT_EQ(m.width(), 32);
  for (double v : m.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(render_sg_map(SgSet{}, 4), DimensionError);
}

TEST(RenderSgMap, ForwardLightPeaksAtCenter) {
  SgSet s;
  s.add({{1, 1, 1}, Direction::normalize({0, 0, 1}), 0.3});
  const int h = 64, w = 128;
  const EnvMap m = render_sg_map(s, h);
  int bx = 0, by = 0;
  double best = -1.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m.at(x, y).r > best) {
        best = m.at(x, y).r;
        bx = x;
        by = y;
      }
    }
  }
  // Nearest pixel centers to (W/2, H/2) are the four around it.
  EXPECT_TRUE(bx == w / 2 || bx == w / 2 - 1);
  EXPECT_TRUE(by == h / 2 || by == h / 2 - 1);
}

TEST(RenderSgMap, MatchesEvalAtPixelCenters) {
  Rng rng(6);
  const SgSet s = random_set(rng, 5);
  const int h = 32, w = 64;
  const EnvMap m = render_sg_map(s, h);
  std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1);
  for (int i = 0; i < 100; ++i) {
    const int x = px(rng), y = py(rng);
    EXPECT_EQ(m.at(x, y), eval_sg(s, pixel_center_direction(x, y, h, w)));
  }
}

TEST(RenderSgMap, PeakRecoveredNearLightCenters) {
  Rng rng(7);
  const SgSet s = random_set(rng, 3);
  const int h = 64, w = 128;
  const EnvMap m = render_sg_map(s, h);
  for (const auto& e : s.entries()) {
    const PixelCoord p = direction_to_pixel(e.light.direction.vec(), h, w);
    const int x = std::min(w - 1, static_cast<int>(p.u));
    const int y = std::min(h - 1, static_cast<int>(p.v));
    const double g = gaussian_kernel(pixel_center_direction(x, y, h, w), e.light.direction,
                                     e.light.sigma);
    EXPECT_GE(m.at(x, y).r, e.light.color.r * g - 1e-12);
  }
}

TEST(ApplyEdit, RemoveOnlyLight) {
  SgSet s;
  const int id = s.add({{1, 1, 1}, Direction::normalize({0, 1, 0}), 0.3});
  EXPECT_TRUE(apply_edit(s, edit::Remove{id}).empty());
  EXPECT_EQ(s.size(), 1u);
}

TEST(ApplyEdit, ScaleInversePair) {
  Rng rng(8);
  const SgSet s = random_set(rng, 3);
  const int id = s.entries()[1].id;
  const SgSet back =
      apply_edit(apply_edit(s, edit::ScaleIntensity{id, 2.0}), edit::ScaleIntensity{id, 0.5});
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Rgb a = s.entries()[i].light.color;
    const Rgb b = back.entries()[i].light.color;
    EXPECT_NEAR(a.r, b.r, 1e-12);
    EXPECT_NEAR(a.g, b.g, 1e-12);
    EXPECT_NEAR(a.b, b.b, 1e-12);
  }
}

TEST(ApplyEdit, SetDirectionNormalizes) {
  SgSet s;
  const int id = s.add({{1, 1, 1}, Direction::normalize({1, 0, 0}), 0.3});
  const SgSet out = apply_edit(s, edit::SetDirection{id, {0, 0, 2}});
  EXPECT_EQ(out.get(id).direction.vec(), (Vec3{0, 0, 1}));
  EXPECT_THROW(apply_edit(s, edit::SetDirection{id, {0, 0, 0}}), ValidationError);
}

TEST(ApplyEdit, ErrorsAndImmutability) {
  Rng rng(9);
  const SgSet s = random_set(rng, 2);
  const SgSet copy = s;
  const int id = s.entries()[0].id;
  EXPECT_THROW(apply_edit(s, edit::Remove{99}), NotFoundError);
  EXPECT_THROW(apply_edit(s, edit::SetBandwidth{99, 0.3}), NotFoundError);
  EXPECT_THROW(apply_edit(s, edit::SetBandwidth{id, 0.0}), ValidationError);
  EXPECT_THROW(apply_edit(s, edit::SetBandwidth{id, -1.0}), ValidationError);
  EXPECT_THROW(apply_edit(s, edit::SetColor{id, {-0.1, 0, 0}}), ValidationError);
  EXPECT_THROW(apply_edit(s, edit::ScaleIntensity{id, -2.0}), ValidationError);
  EXPECT_THROW(apply_edit(s, edit::Add{{{1, 1, 1}, Direction::normalize({0, 0, 1}), 4.0}}),
               ValidationError);
  EXPECT_EQ(s, copy);
}

TEST(ApplyEdit, DisjointEditsCommute) {
  Rng rng(10);
  const SgSet s = random_set(rng, 3);
  const EditOp a = edit::SetColor{s.entries()[0].id, {0.1, 0.2, 0.3}};
  const EditOp b = edit::SetBandwidth{s.entries()[2].id, 0.7};
  EXPECT_EQ(apply_edit(apply_edit(s, a), b), apply_edit(apply_edit(s, b), a));
}

TEST(ApplyEdit, AddAssignsFreshIds) {
  SgSet s;
  const SgLight l{{1, 1, 1}, Direction::normalize({0, 0, 1}), 0.3};
  const int a = s.add(l);
  s.remove(a);
  const SgSet out = apply_edit(s, edit::Add{l});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NE(out.entries()[0].id, a);
}

TEST(SgSet, CapAtMaxLights) {
  SgSet s;
  const SgLight l{{1, 1, 1}, Direction::normalize({0, 0, 1}), 0.3};
  for (std::size_t i = 0; i < SgSet::kMaxLights; ++i) s.add(l);
  EXPECT_THROW(s.add(l), ValidationError);
}

TEST(RelightComposite, Properties) {
  Rng rng(11);
  const EnvMap tex = random_env(rng, 16);
  const EnvMap lights = random_env(rng, 16, 5.0);
  const EnvMap zero(16);
  EXPECT_EQ(relight_composite(tex, zero), tex);
  EXPECT_EQ(relight_composite(zero, lights), lights);
  const EnvMap sum = relight_composite(tex, lights);
  EXPECT_EQ(sum, relight_composite(lights, tex));
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 32; ++x) {
      const Rgb a = tex.at(x, y), b = lights.at(x, y), c = sum.at(x, y);
      EXPECT_EQ(c.r, a.r + b.r);
      EXPECT_EQ(c.g, a.g + b.g);
      EXPECT_EQ(c.b, a.b + b.b);
      EXPECT_GE(c.r, std::max(a.r, b.r));
    }
  }
  EXPECT_THROW(relight_composite(tex, EnvMap(8)), DimensionError);
}

TEST(Serialization, EmptySet) {
  EXPECT_EQ(serialize_lights(SgSet{}), R"({"lights":[]})");
  EXPECT_TRUE(parse_lights(R"({"lights":[]})").empty());
}

TEST(Serialization, RoundTripIsBitExact) {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    SgSet s = random_set(rng, i % 6);
    if (i % 3 == 0 && !s.empty()) s.remove(s.entries()[0].id);
    const SgSet back = parse_lights(serialize_lights(s));
    ASSERT_EQ(back.size(), s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      EXPECT_EQ(back.entries()[k], s.entries()[k]);
    }
  }
}

TEST(Serialization, Errors) {
  EXPECT_THROW(
      parse_lights(R"({"lights":[{"id":0,"color":[1,1,1],"direction":[0,0,1],"sigma":-1}]})"),
      ValidationError);
  EXPECT_THROW(
      parse_lights(R"({"lights":[{"id":0,"color":[-1,1,1],"direction":[0,0,1],"sigma":1}]})"),
      ValidationError);
  EXPECT_THROW(parse_lights(
                   R"({"lights":[{"id":0,"color":[1,1,1],"direction":[0,0,1],"sigma":1,"x":1}]})"),
               ValidationError);
  EXPECT_THROW(parse_lights(R"({"lights":[{"id":0,"color":[1,1,1],"direction":[0,0,1],)"
                            R"("sigma":1},{"id":0,"color":[1,1,1],"direction":[0,0,1],"sigma":1}]})"),
               ValidationError);
  try {
    parse_lights(R"({"lights":[)");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.offset(), 0u);
  }
  EXPECT_THROW(parse_lights("[]"), ValidationError);
}

TEST(Serialization, FieldOrderIrrelevant) {
  const SgSet a = parse_lights(
      R"({"lights":[{"sigma":0.5,"direction":[0,1,0],"color":[1,2,3],"id":7}]})");
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.entries()[0].id, 7);
  EXPECT_EQ(a.get(7).color, (Rgb{1, 2, 3}));
}

TEST(LightPatch, PartialFields) {
  const LightPatch p = parse_light_patch(R"({"sigma":0.2})");
  EXPECT_FALSE(p.color);
  EXPECT_FALSE(p.direction);
  ASSERT_TRUE(p.sigma);
  EXPECT_EQ(*p.sigma, 0.2);
  EXPECT_THROW(parse_light_patch(R"({"bogus":1})"), ValidationError);
}

}  // namespace
}  // namespace envlight
