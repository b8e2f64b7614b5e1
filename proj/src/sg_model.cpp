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

#include "envlight/sg_model.hpp"

#include <algorithm>
#include <array>
#include <utility>
#include <cmath>
#include <numbers>

#include "envlight/geometry.hpp"
#include "json.hpp"

namespace envlight {

using nlohmann::json;

namespace {

constexpr double kUnitTolerance = 1e-9;

void validate_sigma(double sigma) {
  if (!std::isfinite(sigma) || sigma <= 0.0 || sigma > std::numbers::pi) {
    throw ValidationError("sigma must lie in (0, pi]", "sigma");
  }
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
  }
}

double number(const json& j, const char* field) {
  if (!j.is_number()) throw ValidationError(std::string(field) + " must be a number", field);
  return j.get<double>();
}

std::array<double, 3> triple(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) {
    throw ValidationError(std::string(field) + " must be an array of 3 numbers", field);
  }
  return {number(j[0], field), number(j[1], field), number(j[2], field)};
}

Rgb color_from(const json& j) {
  const auto c = triple(j, "color");
  return {c[0], c[1], c[2]};
}

Vec3 vector_from(const json& j) {
  const auto v = triple(j, "direction");
  return {v[0], v[1], v[2]};
}

Direction normalized_payload(const Vec3& v) {
  try {
    return Direction::normalize(v);
  } catch (const DomainError&) {
    throw ValidationError("direction must be a non-zero finite vector", "direction");
  }
}

// Document directions must already be unit length (to 1e-6); values within
// 1e-9 are kept bit-for-bit so parse(serialize(s)) is exact.
Direction document_direction(const Vec3& v) {
  const double n = norm(v);
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) {
    throw ValidationError("direction must be a unit vector", "direction");
  }
  if (std::abs(n - 1.0) <= kUnitTolerance) return Direction::unchecked(v);
  return Direction::normalize(v);
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      throw ValidationError("unknown field '" + key + "'", key);
    }
  }
}

json light_json(int id, const SgLight& l) {
  json j = json::object();
  j["id"] = id;
  j["color"] = {l.color.r, l.color.g, l.color.b};
  j["direction"] = {l.direction.x(), l.direction.y(), l.direction.z()};
  j["sigma"] = l.sigma;
  return j;
}

}  // namespace

void validate_light(const SgLight& light) {
  validate_radiance(light.color);
  const double n = norm(light.direction.vec());
  if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitTolerance) {
    throw ValidationError("direction must be unit length", "direction");
  }
  validate_sigma(light.sigma);
}

int SgSet::add(const SgLight& light) {
  const int id = next_id_;
  insert(id, light);
  return id;
}

void SgSet::insert(int id, const SgLight& light) {
  validate_light(light);
  if (id < 0) throw ValidationError("light ids must be non-negative", "id");
  if (contains(id)) {
    throw ValidationError("duplicate light id " + std::to_string(id), "id");
  }
  if (entries_.size() >= kMaxLights) {
    throw ValidationError("a light set holds at most " + std::to_string(kMaxLights) +
                              " lights",
                          "lights");
  }
  entries_.push_back({id, light});
  next_id_ = std::max(next_id_, id + 1);
}

std::vector<SgSet::Entry>::const_iterator SgSet::find(int id) const {
  return std::find_if(entries_.begin(), entries_.end(),
                      [id](const Entry& e) { return e.id == id; });
}

bool SgSet::contains(int id) const { return find(id) != entries_.end(); }

void SgSet::remove(int id) {
  const auto it = find(id);
  if (it == entries_.end()) throw NotFoundError("no light with id " + std::to_string(id));
  entries_.erase(it);
}

const SgLight& SgSet::get(int id) const {
  const auto it = find(id);
  if (it == entries_.end()) throw NotFoundError("no light with id " + std::to_string(id));
  return it->light;
}

SgLight& SgSet::get(int id) {
  return const_cast<SgLight&>(std::as_const(*this).get(id));
}

double gaussian_kernel(const Direction& w, const Direction& axis, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("gaussian bandwidth must be positive");
  // 1 - w.axis written as half the squared chord: exact zero at the peak.
  const Vec3 d = w.vec() - axis.vec();
  return std::exp(-0.5 * dot(d, d) / (sigma * sigma));
}

Rgb eval_sg(const SgSet& set, const Direction& w) {
  Rgb out;
  for (const auto& e : set.entries()) {
    out += e.light.color * gaussian_kernel(w, e.light.direction, e.light.sigma);
  }
  return out;
}

EnvMap render_sg_map(const SgSet& set, int height) {
  if (height < 8) throw DimensionError("light map height must be >= 8");
  const int width = 2 * height;
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out.set(x, y, eval_sg(set, pixel_center_direction(x, y, height, width)));
    }
  }
  return EnvMap::from_image(std::move(out));
}

SgSet apply_edit(const SgSet& set, const EditOp& op) {
  SgSet out = set;
  std::visit(
      [&out](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, edit::Add>) {
          out.add(o.light);
        } else if constexpr (std::is_same_v<T, edit::Remove>) {
          out.remove(o.id);
        } else {
          SgLight light = out.get(o.id);
          if constexpr (std::is_same_v<T, edit::SetColor>) {
            light.color = o.color;
          } else if constexpr (std::is_same_v<T, edit::SetDirection>) {
            light.direction = normalized_payload(o.direction);
          } else if constexpr (std::is_same_v<T, edit::SetBandwidth>) {
            light.sigma = o.sigma;
          } else if constexpr (std::is_same_v<T, edit::ScaleIntensity>) {
            if (!std::isfinite(o.factor) || o.factor < 0.0) {
              throw ValidationError("intensity scale must be finite and >= 0", "scale");
            }
            light.color = light.color * o.factor;
          }
          validate_light(light);
          out.get(o.id) = light;
        }
      },
      op);
  return out;
}

EnvMap relight_composite(const EnvMap& texture, const EnvMap& light_map) {
  if (texture.height() != light_map.height()) {
    throw DimensionError("relight_composite: texture and light map sizes differ");
  }
  Image out(texture.width(), texture.height());
  const auto a = texture.data();
  const auto b = light_map.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] + b[i];
  return EnvMap::from_image(std::move(out));
}

std::string serialize_lights(const SgSet& set) {
  json doc = json::object();
  doc["lights"] = json::array();
  for (const auto& e : set.entries()) doc["lights"].push_back(light_json(e.id, e.light));
  return doc.dump();
}

std::string serialize_light(int id, const SgLight& light) {
  return light_json(id, light).dump();
}

SgSet parse_lights(std::string_view text) {
  const json doc = parse_document(text);
  if (!doc.is_object()) throw ValidationError("document must be a JSON object");
  reject_unknown(doc, {"lights"});
  if (!doc.contains("lights") || !doc["lights"].is_array()) {
    throw ValidationError("missing 'lights' array", "lights");
  }
  SgSet set;
  for (const json& item : doc["lights"]) {
    if (!item.is_object()) throw ValidationError("each light must be an object", "lights");
    reject_unknown(item, {"id", "color", "direction", "sigma"});
    for (const char* f : {"id", "color", "direction", "sigma"}) {
      if (!item.contains(f)) throw ValidationError(std::string("missing field '") + f + "'", f);
    }
    if (!item["id"].is_number_integer()) throw ValidationError("id must be an integer", "id");
    SgLight light;
    light.color = color_from(item["color"]);
    light.direction = document_direction(vector_from(item["direction"]));
    light.sigma = number(item["sigma"], "sigma");
    set.insert(item["id"].get<int>(), light);
  }
  return set;
}

SgLight parse_light(std::string_view text) {
  const json j = parse_document(text);
  if (!j.is_object()) throw ValidationError("light must be a JSON object");
  reject_unknown(j, {"id", "color", "direction", "sigma"});
  for (const char* f : {"color", "direction", "sigma"}) {
    if (!j.contains(f)) throw ValidationError(std::string("missing field '") + f + "'", f);
  }
  SgLight light;
  light.color = color_from(j["color"]);
  light.direction = normalized_payload(vector_from(j["direction"]));
  light.sigma = number(j["sigma"], "sigma");
  validate_light(light);
  return light;
}

LightPatch parse_light_patch(std::string_view text) {
  const json j = parse_document(text);
  if (!j.is_object()) throw ValidationError("patch must be a JSON object");
  reject_unknown(j, {"color", "direction", "sigma", "scale"});
  LightPatch p;
  if (j.contains("color")) p.color = color_from(j["color"]);
  if (j.contains("direction")) p.direction = vector_from(j["direction"]);
  if (j.contains("sigma")) p.sigma = number(j["sigma"], "sigma");
  if (j.contains("scale")) p.scale = number(j["scale"], "scale");
  return p;
}

}  // namespace envlight
