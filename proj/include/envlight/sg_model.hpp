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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "envlight/image.hpp"
#include "envlight/vec.hpp"

namespace envlight {

/// One isotropic spherical gaussian light: radiance `color` at the lobe
/// center, falling off as exp(-(1 - w.axis) / sigma^2).
struct SgLight {
  Rgb color;
  Direction direction;
  double sigma = 0.45;

  friend bool operator==(const SgLight&, const SgLight&) = default;
};

/// Throws ValidationError naming the offending field.
void validate_light(const SgLight& light);

/// Ordered set of lights with stable ids. Ids are never reused within a
/// set's lineage: removing a light does not free its id.
class SgSet {
 public:
  static constexpr std::size_t kMaxLights = 32;

  struct Entry {
    int id = 0;
    SgLight light;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  SgSet() = default;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  int next_id() const { return next_id_; }

  /// Appends with a fresh id and returns it.
  int add(const SgLight& light);
  /// Appends with a caller-chosen id (deserialization).
  void insert(int id, const SgLight& light);
  void remove(int id);
  const SgLight& get(int id) const;
  SgLight& get(int id);
  bool contains(int id) const;

  friend bool operator==(const SgSet&, const SgSet&) = default;

 private:
  std::vector<Entry>::const_iterator find(int id) const;

  std::vector<Entry> entries_;
  int next_id_ = 0;
};

/// exp(-(1 - w.axis) / sigma^2); throws DomainError for sigma <= 0.
double gaussian_kernel(const Direction& w, const Direction& axis, double sigma);

/// Mixture radiance along `w`.
Rgb eval_sg(const SgSet& set, const Direction& w);

/// Evaluates the mixture at every pixel center of an H x 2H panorama.
EnvMap render_sg_map(const SgSet& set, int height);

namespace edit {
struct Add {
  SgLight light;
};
struct Remove {
  int id;
};
struct SetColor {
  int id;
  Rgb color;
};
/// The payload is normalized, so raw drag vectors are fine.
struct SetDirection {
  int id;
  Vec3 direction;
};
struct SetBandwidth {
  int id;
  double sigma;
};
struct ScaleIntensity {
  int id;
  double factor;
};
}  // namespace edit

using EditOp = std::variant<edit::Add, edit::Remove, edit::SetColor,
                            edit::SetDirection, edit::SetBandwidth,
                            edit::ScaleIntensity>;

/// Returns the edited copy. NotFoundError for an unknown id, ValidationError
/// when the result would break a light invariant.
SgSet apply_edit(const SgSet& set, const EditOp& op);

/// Additive composite of a light map over a texture, in linear radiance.
EnvMap relight_composite(const EnvMap& texture, const EnvMap& light_map);

/// {"lights":[{"id":0,"color":[r,g,b],"direction":[x,y,z],"sigma":s}, ...]}
std::string serialize_lights(const SgSet& set);
/// ParseError (with byte offset) for malformed JSON, ValidationError for
/// schema or invariant violations. Unknown fields are rejected.
SgSet parse_lights(std::string_view text);

/// Partial light update as sent by clients: any subset of the fields.
/// Directions are normalized; validation happens on the merged light.
struct LightPatch {
  std::optional<Rgb> color;
  std::optional<Vec3> direction;
  std::optional<double> sigma;
  std::optional<double> scale;
};
LightPatch parse_light_patch(std::string_view text);
/// Full light from a JSON object without an id; the direction is normalized.
SgLight parse_light(std::string_view text);
std::string serialize_light(int id, const SgLight& light);

}  // namespace envlight
