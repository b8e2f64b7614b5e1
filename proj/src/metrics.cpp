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

#include "envlight/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>

#include "envlight/errors.hpp"
#include "envlight/geometry.hpp"
#include "envlight/hdr_io.hpp"
#include "json.hpp"

namespace envlight {

namespace {

using json = nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

void check_same_size(const Image& a, const Image& b) {
  if (!a.same_size(b)) throw DimensionError("metric inputs differ in size");
  if (a.empty()) throw DimensionError("metric inputs are empty");
}

double mean_squared_error(std::span<const double> a, std::span<const double> b,
                          double scale) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = scale * a[i] - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

}  // namespace

double rmse(const Image& a, const Image& b) {
  check_same_size(a, b);
  return std::sqrt(mean_squared_error(a.data(), b.data(), 1.0));
}

double si_rmse(const Image& a, const Image& b) {
  check_same_size(a, b);
  const auto pa = a.data();
  const auto pb = b.data();
  double ab = 0.0, aa = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ab += pa[i] * pb[i];
    aa += pa[i] * pa[i];
  }
  const double alpha = aa > 0.0 ? ab / aa : 0.0;
  return std::sqrt(mean_squared_error(pa, pb, alpha));
}

double rgb_angular(const Image& a, const Image& b) {
  check_same_size(a, b);
  double sum = 0.0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const Rgb p = a.at(x, y);
      const Rgb q = b.at(x, y);
      const double np = std::sqrt(p.r * p.r + p.g * p.g + p.b * p.b);
      const double nq = std::sqrt(q.r * q.r + q.g * q.g + q.b * q.b);
      if (np < 1e-9 || nq < 1e-9) continue;
      // atan2 of |p x q| and p.q stays accurate near 0 where acos does not.
      const Vec3 u{p.r, p.g, p.b};
      const Vec3 v{q.r, q.g, q.b};
      sum += std::atan2(norm(cross(u, v)), dot(u, v));
    }
  }
  return sum / static_cast<double>(a.pixel_count()) / kDeg;
}

double psnr(const Image& a, const Image& b, double peak) {
  check_same_size(a, b);
  const double mse = mean_squared_error(a.data(), b.data(), 1.0);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

std::vector<Image> extract_views(const EnvMap& pano, std::span<const double> azimuths_deg,
                                 double elevation, double fov, int out_size) {
  std::vector<Image> views;
  views.reserve(azimuths_deg.size());
  for (double az : azimuths_deg) {
    CameraPose cam;
    cam.horizontal_fov = fov;
    cam.elevation = elevation;
    cam.azimuth = az * kDeg;
    views.push_back(extract_view(pano, cam, out_size, out_size));
  }
  return views;
}

MetricsReport evaluate_pair(const EnvMap& gt, const Lighting& pred,
                            std::string_view scene_name, const RenderConfig& cfg) {
  const SceneSpec scene = preset_scene(scene_name);
  cfg.validate();
  const EnvMap pred_env = std::holds_alternative<EnvMap>(pred)
                              ? std::get<EnvMap>(pred)
                              : render_sg_map(std::get<SgSet>(pred), gt.height());
  const Image gt_render = render_scene(gt, scene, cfg);
  const Image pred_render = render_scene(pred_env, scene, cfg);
  MetricsReport r;
  r.rmse = rmse(pred_render, gt_render);
  r.si_rmse = si_rmse(pred_render, gt_render);
  r.rgb_angular_deg = rgb_angular(pred_render, gt_render);
  r.psnr_db = psnr(tonemap(pred_render, cfg.exposure, cfg.gamma),
                   tonemap(gt_render, cfg.exposure, cfg.gamma));
  return r;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                    const char* where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError(std::string("unknown field '") + key + "' in " + where, key);
    }
  }
}

std::string string_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw ValidationError(std::string(key) + " must be a non-empty string", key);
  }
  return it->get<std::string>();
}

double number_field(const json& obj, const char* key, double fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw ValidationError(std::string(key) + " must be a number", key);
  return it->get<double>();
}

int int_field(const json& obj, const char* key, int fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) {
    throw ValidationError(std::string(key) + " must be an integer", key);
  }
  return it->get<int>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string error_tag(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return "error:io";
  if (dynamic_cast<const ParseError*>(&e)) return "error:parse";
  if (dynamic_cast<const NotFoundError*>(&e)) return "error:not_found";
  if (dynamic_cast<const NumericalError*>(&e)) return "error:numerical";
  return "error:validation";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

EvalManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ValidationError("manifest must be a JSON object");
  reject_unknown(doc, {"scene", "output", "render", "entries"}, "manifest");

  EvalManifest m;
  if (doc.contains("scene")) m.scene = string_field(doc, "scene");
  preset_scene(m.scene);
  if (doc.contains("output")) m.output = resolve(base_dir, string_field(doc, "output"));
  if (doc.contains("render")) {
    const json& r = doc["render"];
    if (!r.is_object()) throw ValidationError("render must be an object", "render");
    reject_unknown(r,
                   {"width", "height", "shade_env_height", "mirror_depth", "exposure", "gamma",
                    "sphere_shadows"},
                   "render");
    m.render.width = int_field(r, "width", m.render.width);
    m.render.height = int_field(r, "height", m.render.height);
    m.render.shade_env_height = int_field(r, "shade_env_height", m.render.shade_env_height);
    m.render.mirror_depth = int_field(r, "mirror_depth", m.render.mirror_depth);
    m.render.exposure = number_field(r, "exposure", m.render.exposure);
    m.render.gamma = number_field(r, "gamma", m.render.gamma);
    if (r.contains("sphere_shadows")) {
      if (!r["sphere_shadows"].is_boolean()) {
        throw ValidationError("sphere_shadows must be a boolean", "sphere_shadows");
      }
      m.render.sphere_shadows = r["sphere_shadows"].get<bool>();
    }
  }
  m.render.validate();

  const auto entries = doc.find("entries");
  if (entries == doc.end() || !entries->is_array()) {
    throw ValidationError("entries must be an array", "entries");
  }
  std::set<std::string> ids;
  for (const json& e : *entries) {
    if (!e.is_object()) throw ValidationError("each entry must be an object", "entries");
    reject_unknown(e, {"id", "gt_env", "pred_env", "lights", "view"}, "entry");
    EvalEntry entry;
    entry.id = string_field(e, "id");
    if (!ids.insert(entry.id).second) {
      throw ValidationError("duplicate entry id '" + entry.id + "'", "id");
    }
    entry.gt_env = resolve(base_dir, string_field(e, "gt_env"));
    const bool has_env = e.contains("pred_env");
    const bool has_lights = e.contains("lights");
    if (has_env == has_lights) {
      throw ValidationError("entry '" + entry.id + "' needs exactly one of pred_env, lights",
                            "pred_env");
    }
    if (has_env) entry.pred_env = resolve(base_dir, string_field(e, "pred_env"));
    if (has_lights) entry.lights = resolve(base_dir, string_field(e, "lights"));
    if (e.contains("view")) {
      const json& v = e["view"];
      if (!v.is_object()) throw ValidationError("view must be an object", "view");
      reject_unknown(v, {"azimuth_deg"}, "view");
      entry.azimuth_deg = number_field(v, "azimuth_deg", 0.0);
      if (!std::isfinite(entry.azimuth_deg)) {
        throw ValidationError("azimuth_deg must be finite", "azimuth_deg");
      }
    }
    m.entries.push_back(std::move(entry));
  }
  return m;
}

EvalManifest read_manifest(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        path.parent_path());
}

std::string run_manifest(const EvalManifest& manifest) {
  std::string out(kReportHeader);
  out += '\n';
  MetricsReport sum;
  int ok = 0;
  for (const EvalEntry& entry : manifest.entries) {
    out += csv_field(entry.id);
    try {
      EnvMap gt = read_env(entry.gt_env);
      Lighting pred;
      if (!entry.pred_env.empty()) {
        pred = read_env(entry.pred_env);
      } else {
        const Bytes text = read_file(entry.lights);
        pred = parse_lights(
            std::string_view(reinterpret_cast<const char*>(text.data()), text.size()));
      }
      if (entry.azimuth_deg != 0.0) {
        const double radians = entry.azimuth_deg * kDeg;
        if (auto* set = std::get_if<SgSet>(&pred)) pred = render_sg_map(*set, gt.height());
        gt = rotate_azimuth(gt, radians);
        pred = rotate_azimuth(std::get<EnvMap>(pred), radians);
      }
      const MetricsReport r = evaluate_pair(gt, pred, manifest.scene, manifest.render);
      out += ',' + format_number(r.rmse) + ',' + format_number(r.si_rmse) + ',' +
             format_number(r.rgb_angular_deg) + ',' + format_number(r.psnr_db) + ",n/a,ok\n";
      sum.rmse += r.rmse;
      sum.si_rmse += r.si_rmse;
      sum.rgb_angular_deg += r.rgb_angular_deg;
      sum.psnr_db += r.psnr_db;
      ++ok;
    } catch (const Error& e) {
      out += ",,,,,n/a," + error_tag(e) + '\n';
    }
  }
  if (ok > 0) {
    const double n = ok;
    out += "mean," + format_number(sum.rmse / n) + ',' + format_number(sum.si_rmse / n) + ',' +
           format_number(sum.rgb_angular_deg / n) + ',' + format_number(sum.psnr_db / n) +
           ",n/a,ok\n";
  }
  return out;
}

}  // namespace envlight
