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

// Render-based comparison of lighting estimates. Both lightings render the
// same preset scene; RMSE, siRMSE and RGB angular error are measured on the
// linear HDR renders and PSNR on the tonemapped ones.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "envlight/image.hpp"
#include "envlight/render.hpp"
#include "envlight/sg_model.hpp"

namespace envlight {

struct MetricsReport {
  double rmse = 0.0;
  double si_rmse = 0.0;
  double rgb_angular_deg = 0.0;
  double psnr_db = 0.0;  // +inf for identical renders
};

/// All metrics throw DimensionError when the images differ in size.
double rmse(const Image& a, const Image& b);
/// Scales the prediction `a` by the least-squares factor <a,b>/<a,a> (0 for
/// an all-zero `a`) before taking the RMSE against the reference `b`.
double si_rmse(const Image& a, const Image& b);
/// Mean per-pixel angle between RGB vectors in degrees. Pixels where either
/// vector is shorter than 1e-9 count as 0.
double rgb_angular(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Pinhole crops at the given azimuths (degrees), square, `fov` horizontal.
std::vector<Image> extract_views(const EnvMap& pano, std::span<const double> azimuths_deg,
                                 double elevation, double fov, int out_size);

using Lighting = std::variant<EnvMap, SgSet>;

/// Renders `gt` and `pred` (an SgSet is first rendered at gt's height) with
/// the preset scene.
MetricsReport evaluate_pair(const EnvMap& gt, const Lighting& pred,
                            std::string_view scene_name, const RenderConfig& cfg);

struct EvalEntry {
  std::string id;
  std::filesystem::path gt_env;
  std::filesystem::path pred_env;  // exactly one of pred_env / lights is set
  std::filesystem::path lights;
  double azimuth_deg = 0.0;        // rotates both environments before rendering
};

struct EvalManifest {
  std::string scene = "spheres9_top";
  std::filesystem::path output;
  RenderConfig render;
  std::vector<EvalEntry> entries;
};

/// Relative paths resolve against `base_dir`. ValidationError for schema
/// problems, ParseError for malformed JSON.
EvalManifest parse_manifest(std::string_view text,
                            const std::filesystem::path& base_dir = {});
EvalManifest read_manifest(const std::filesystem::path& path);

inline constexpr std::string_view kReportHeader =
    "id,rmse,si_rmse,rgb_ang_deg,psnr_db,fid,status";

/// One row per entry in manifest order plus a trailing "mean" row over the
/// successful entries. A failing entry gets an "error:<kind>" status and
/// empty metric cells; the others are unaffected.
std::string run_manifest(const EvalManifest& manifest);

}  // namespace envlight
