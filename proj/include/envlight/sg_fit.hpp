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

// Inverse of render_sg_map: recovers a spherical gaussian light set from an
// HDR panorama. Pipeline: luminance + wrap-around blur, percentile threshold,
// seam-aware connected components, per-component initialization, then
// full-batch gradient descent on
//
//   lambda1 * sum_pixels |f_SG(w; p) - E(w)|^2 + reg(p)
//
// with a plateau learning-rate schedule and periodic non-maximum
// suppression of overlapping lights.

#include <cstdint>
#include <limits>
#include <string>
#include <span>
#include <string_view>
#include <vector>

#include "envlight/image.hpp"
#include "envlight/sg_model.hpp"

namespace envlight {

struct FitOptions {
  int target_height = 128;
  double blur_sigma = 3.0;             // pixels
  double threshold_percentile = 98.5;  // percent
  double init_sigma = 0.45;
  double lambda1 = 1.0 / 50.0;
  double learning_rate = 5e-4;
  int plateau_epochs = 20;
  double lr_decay_factor = 2.0;
  int max_epochs = 1500;
  double min_lr = 1e-6;
  int nms_interval = 20;
  int max_lights = 32;
  double lambda_unit = 1.0;
  double lambda_neg = 10.0;
  double lambda_band = 1.0;
  double lambda_sat = 1.0;

  /// Throws ValidationError naming the first bad field.
  void validate() const;
};

/// Overrides from a JSON object whose keys are the FitOptions field names.
/// Unknown keys are rejected.
FitOptions apply_fit_overrides(FitOptions base, std::string_view json_text);
std::string fit_options_to_json(const FitOptions& opts);

enum class Termination { kConverged, kMaxEpochs, kLrFloor };
const char* termination_name(Termination t);

struct FitTrace {
  std::vector<double> loss;           // loss at the start of each epoch
  std::vector<double> best_loss;      // best loss seen so far
  std::vector<double> learning_rate;  // rate in effect for that epoch's step
  std::vector<int> light_count;
  std::vector<int> fuse_epochs;       // epochs where NMS merged lights
  Termination termination = Termination::kConverged;
};

// ---------------------------------------------------------------------------
// Preprocessing

struct Highlights {
  int width = 0;
  int height = 0;
  std::vector<double> blurred;      // blurred luminance, row-major
  std::vector<std::uint8_t> mask;   // blurred > threshold
  double threshold = 0.0;
};

/// Separable gaussian blur; columns wrap around the seam, rows clamp at the
/// poles.
std::vector<double> blur_wrap(std::span<const double> values, int width,
                              int height, double sigma);

/// Linear interpolation between order statistics, p in (0, 100).
double percentile(std::vector<double> values, double p);

Highlights preprocess(const EnvMap& env, const FitOptions& opts);

/// Row-major pixel indices of one 8-connected region.
using Component = std::vector<int>;

/// 8-connectivity with column 0 adjacent to column W-1. Components are
/// ordered by their first pixel in raster order.
std::vector<Component> connected_components(std::span<const std::uint8_t> mask,
                                            int width, int height);

/// One light per component (brightest first, at most opts.max_lights):
/// direction from the luminance-weighted centroid, color from the brightest
/// pixel, bandwidth opts.init_sigma.
SgSet init_lights(const EnvMap& env, const std::vector<Component>& components,
                  const FitOptions& opts);

// ---------------------------------------------------------------------------
// Objective

/// Unconstrained optimizer state for one light. `axis` need not be unit
/// length; the kernel uses axis/|axis| and the regularizer pulls |axis| to 1.
struct RawLight {
  Rgb color;
  Vec3 axis;
  double sigma = 0.45;
};
using SgParams = std::vector<RawLight>;

SgParams to_params(const SgSet& set);
/// Normalizes axes, clamps colors to >= 0 and sigma into [1e-3, pi], and
/// numbers the lights 0..K-1 in the given order.
SgSet to_set(const SgParams& params);

double regularizer(const SgParams& params, const FitOptions& opts);

/// Data term plus regularizer, evaluated with the SIMD kernels. Holds the
/// pixel directions and scratch buffers so repeated evaluations allocate
/// nothing.
class FitObjective {
 public:
  FitObjective(const EnvMap& env, const FitOptions& opts);

  double loss(const SgParams& params);
  /// Returns the loss and writes d(loss)/d(param) into `grad` (same shape).
  double loss_and_gradient(const SgParams& params, SgParams& grad);

  std::size_t pixel_count() const { return dir_x_.size(); }

 private:
  double data_term(const SgParams& params, bool keep_lobes);

  FitOptions opts_;
  std::vector<double> dir_x_, dir_y_, dir_z_;
  std::vector<double> target_r_, target_g_, target_b_;
  std::vector<double> model_r_, model_g_, model_b_;
  std::vector<double> res_r_, res_g_, res_b_;
  std::vector<double> lobes_;
  std::vector<Vec3> unit_axes_;
};

double fit_loss(const SgParams& params, const EnvMap& env, const FitOptions& opts);
SgParams loss_gradient(const SgParams& params, const EnvMap& env,
                       const FitOptions& opts);

// ---------------------------------------------------------------------------
// Light fusion and the optimizer

/// Repeatedly merges the overlapping pair, 1 - a.b < (s_a^2 + s_b^2)/2, with
/// the largest combined L1 color: the brighter light absorbs the other's
/// color and takes the larger bandwidth.
SgParams nms_fuse(SgParams params);
SgSet nms_fuse(const SgSet& set);

/// Learning-rate plateau rule: divide by `factor` once the best loss has not
/// improved for `patience` consecutive epochs.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, int patience, double factor)
      : lr_(lr), patience_(patience), factor_(factor) {}

  /// Records an epoch's loss; returns true when the rate was just reduced.
  bool observe(double loss);
  /// Forget the best loss (after the parameter space changes shape).
  void rebase(double loss);

  double learning_rate() const { return lr_; }
  double best_loss() const { return best_; }
  int stalled_epochs() const { return stall_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int stall_ = 0;
};

struct FitResult {
  SgSet lights;  // sorted by descending L1 color
  FitTrace trace;
};

/// Resamples to opts.target_height and runs the full pipeline. An env with no
/// highlights yields an empty set. Throws NumericalError if the loss stops
/// being finite (lower the learning rate).
FitResult fit(const EnvMap& env, const FitOptions& opts = {});

}  // namespace envlight
