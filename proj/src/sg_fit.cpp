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

#include "envlight/sg_fit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>

#include "envlight/geometry.hpp"
#include "envlight/simd/kernels.hpp"
#include "json.hpp"

namespace envlight {

using nlohmann::json;

namespace {

constexpr double kSigmaFloor = 0.05;
constexpr double kSaturationKnee = 0.9;
constexpr int kConvergenceWindow = 50;
constexpr double kConvergenceTolerance = 1e-7;

double l1(const Rgb& c) { return std::abs(c.r) + std::abs(c.g) + std::abs(c.b); }

double channel(const Rgb& c, int i) { return i == 0 ? c.r : (i == 1 ? c.g : c.b); }
double& channel(Rgb& c, int i) { return i == 0 ? c.r : (i == 1 ? c.g : c.b); }

}  // namespace

// ---------------------------------------------------------------------------
// Options

void FitOptions::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string(field) + " must be positive", field);
    }
  };
  positive(target_height, "target_height");
  positive(blur_sigma, "blur_sigma");
  if (!(threshold_percentile > 0.0 && threshold_percentile < 100.0)) {
    throw ValidationError("threshold_percentile must lie in (0, 100)",
                          "threshold_percentile");
  }
  positive(init_sigma, "init_sigma");
  if (init_sigma > std::numbers::pi) {
    throw ValidationError("init_sigma must not exceed pi", "init_sigma");
  }
  positive(lambda1, "lambda1");
  positive(learning_rate, "learning_rate");
  positive(plateau_epochs, "plateau_epochs");
  if (!(lr_decay_factor > 1.0)) {
    throw ValidationError("lr_decay_factor must exceed 1", "lr_decay_factor");
  }
  positive(max_epochs, "max_epochs");
  positive(min_lr, "min_lr");
  positive(nms_interval, "nms_interval");
  positive(max_lights, "max_lights");
  if (max_lights > static_cast<int>(SgSet::kMaxLights)) {
    throw ValidationError("max_lights must not exceed 32", "max_lights");
  }
  positive(lambda_unit, "lambda_unit");
  positive(lambda_neg, "lambda_neg");
  positive(lambda_band, "lambda_band");
  positive(lambda_sat, "lambda_sat");
}

namespace {

template <typename F>
void for_each_field(FitOptions& o, F&& f) {
  f("target_height", o.target_height);
  f("blur_sigma", o.blur_sigma);
  f("threshold_percentile", o.threshold_percentile);
  f("init_sigma", o.init_sigma);
  f("lambda1", o.lambda1);
  f("learning_rate", o.learning_rate);
  f("plateau_epochs", o.plateau_epochs);
  f("lr_decay_factor", o.lr_decay_factor);
  f("max_epochs", o.max_epochs);
  f("min_lr", o.min_lr);
  f("nms_interval", o.nms_interval);
  f("max_lights", o.max_lights);
  f("lambda_unit", o.lambda_unit);
  f("lambda_neg", o.lambda_neg);
  f("lambda_band", o.lambda_band);
  f("lambda_sat", o.lambda_sat);
}

}  // namespace

FitOptions apply_fit_overrides(FitOptions base, std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed fit options: ") + e.what(), e.byte);
  }
  if (doc.is_null()) return base;
  if (!doc.is_object()) throw ValidationError("fit options must be a JSON object");
  std::size_t matched = 0;
  for_each_field(base, [&](const char* key, auto& field) {
    if (!doc.contains(key)) return;
    ++matched;
    const json& v = doc[key];
    using T = std::decay_t<decltype(field)>;
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ValidationError(std::string(key) + " must be an integer", key);
      field = v.get<T>();
    } else {
      if (!v.is_number()) throw ValidationError(std::string(key) + " must be a number", key);
      field = v.get<T>();
    }
  });
  if (matched != doc.size()) {
    for (const auto& [key, value] : doc.items()) {
      bool known = false;
      for_each_field(base, [&](const char* k, auto&) { known = known || key == k; });
      if (!known) throw ValidationError("unknown fit option '" + key + "'", key);
    }
  }
  base.validate();
  return base;
}

std::string fit_options_to_json(const FitOptions& opts) {
  FitOptions copy = opts;
  json doc = json::object();
  for_each_field(copy, [&](const char* key, auto& field) { doc[key] = field; });
  return doc.dump();
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::kConverged:
      return "converged";
    case Termination::kMaxEpochs:
      return "max_epochs";
    case Termination::kLrFloor:
      return "lr_floor";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Preprocessing

std::vector<double> blur_wrap(std::span<const double> values, int width, int height,
                              double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  }
  const double total = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& k : kernel) k /= total;

  std::vector<double> tmp(values.size());
  for (int y = 0; y < height; ++y) {
    const double* row = values.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int xx = ((x + k) % width + width) % width;
        acc += kernel[k + radius] * row[xx];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  std::vector<double> out(values.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int yy = std::clamp(y + k, 0, height - 1);
        acc += kernel[k + radius] * tmp[static_cast<std::size_t>(yy) * width + x];
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double t = rank - static_cast<double>(lo);
  return values[lo] + t * (values[hi] - values[lo]);
}

Highlights preprocess(const EnvMap& env, const FitOptions& opts) {
  Highlights h;
  h.width = env.width();
  h.height = env.height();
  std::vector<double> lum(env.pixel_count());
  const auto px = env.data();
  for (std::size_t i = 0; i < lum.size(); ++i) {
    lum[i] = luminance({px[3 * i], px[3 * i + 1], px[3 * i + 2]});
  }
  h.blurred = blur_wrap(lum, h.width, h.height, opts.blur_sigma);
  h.threshold = percentile(h.blurred, opts.threshold_percentile);
  h.mask.resize(lum.size());
  for (std::size_t i = 0; i < lum.size(); ++i) h.mask[i] = h.blurred[i] > h.threshold;
  return h;
}

std::vector<Component> connected_components(std::span<const std::uint8_t> mask,
                                            int width, int height) {
  if (mask.size() != static_cast<std::size_t>(width) * height) {
    throw DimensionError("mask size does not match the grid");
  }
  std::vector<int> label(mask.size(), -1);
  std::vector<Component> out;
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(mask.size()); ++start) {
    if (!mask[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(out.size());
    Component comp;
    label[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      comp.push_back(p);
      const int py = p / width;
      const int px = p % width;
      for (int dy = -1; dy <= 1; ++dy) {
        const int ny = py + dy;
        if (ny < 0 || ny >= height) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = (px + dx + width) % width;
          const int q = ny * width + nx;
          if (mask[q] && label[q] < 0) {
            label[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

SgSet init_lights(const EnvMap& env, const std::vector<Component>& components,
                  const FitOptions& opts) {
  struct Seed {
    double peak_luminance;
    SgLight light;
  };
  std::vector<Seed> seeds;
  const int w = env.width();
  const int h = env.height();
  for (const Component& comp : components) {
    if (comp.empty()) continue;
    Vec3 centroid;
    int peak = comp.front();
    double peak_lum = -1.0;
    for (int p : comp) {
      const Rgb c = env.at(p % w, p / w);
      const double lum = luminance(c);
      centroid += lum * pixel_center_direction(p % w, p / w, h, w).vec();
      if (lum > peak_lum) {
        peak_lum = lum;
        peak = p;
      }
    }
    const Direction peak_dir = pixel_center_direction(peak % w, peak / w, h, w);
    const double n = norm(centroid);
    const Direction dir = n > 1e-12 * (1.0 + peak_lum) && std::isfinite(n)
                              ? Direction::normalize(centroid)
                              : peak_dir;
    seeds.push_back({peak_lum, {env.at(peak % w, peak / w), dir, opts.init_sigma}});
  }
  std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) {
    return a.peak_luminance > b.peak_luminance;
  });
  SgSet set;
  const std::size_t k = std::min<std::size_t>(seeds.size(), opts.max_lights);
  for (std::size_t i = 0; i < k; ++i) set.add(seeds[i].light);
  return set;
}

// ---------------------------------------------------------------------------
// Objective

SgParams to_params(const SgSet& set) {
  SgParams p;
  p.reserve(set.size());
  for (const auto& e : set.entries()) {
    p.push_back({e.light.color, e.light.direction.vec(), e.light.sigma});
  }
  return p;
}

SgSet to_set(const SgParams& params) {
  SgSet set;
  for (const RawLight& l : params) {
    const double n = norm(l.axis);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw NumericalError("light axis collapsed to zero during fitting");
    }
    SgLight light;
    light.color = {std::max(0.0, l.color.r), std::max(0.0, l.color.g),
                   std::max(0.0, l.color.b)};
    light.direction = Direction::normalize(l.axis);
    light.sigma = std::clamp(std::abs(l.sigma), 1e-3, std::numbers::pi);
    set.add(light);
  }
  return set;
}

namespace {

struct Saturation {
  double value = 0.0;
  int argmin = 0;
  int argmax = 0;
  double min = 0.0;
  double max = 0.0;
};

Saturation saturation(const Rgb& c) {
  Saturation s;
  s.min = s.max = c.r;
  for (int i = 1; i < 3; ++i) {
    const double v = channel(c, i);
    if (v < s.min) {
      s.min = v;
      s.argmin = i;
    }
    if (v > s.max) {
      s.max = v;
      s.argmax = i;
    }
  }
  s.value = s.max > 0.0 ? 1.0 - s.min / s.max : 0.0;
  return s;
}

// Adds the regularizer gradient into `grad` when non-null.
double regularize(const SgParams& params, const FitOptions& o, SgParams* grad) {
  double total = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const RawLight& l = params[k];
    const double n = norm(l.axis);
    total += o.lambda_unit * (n - 1.0) * (n - 1.0);

    double neg = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double m = std::min(channel(l.color, i), 0.0);
      neg += m * m;
    }
    total += o.lambda_neg * neg;

    const double over = std::max(0.0, l.sigma - std::numbers::pi);
    const double under = std::max(0.0, kSigmaFloor - l.sigma);
    total += o.lambda_band * (over * over + under * under);

    const Saturation s = saturation(l.color);
    const double excess = std::max(0.0, s.value - kSaturationKnee);
    total += o.lambda_sat * excess * excess;

    if (grad == nullptr) continue;
    RawLight& g = (*grad)[k];
    if (n > 0.0) g.axis += (2.0 * o.lambda_unit * (n - 1.0) / n) * l.axis;
    for (int i = 0; i < 3; ++i) {
      channel(g.color, i) += 2.0 * o.lambda_neg * std::min(channel(l.color, i), 0.0);
    }
    g.sigma += 2.0 * o.lambda_band * (over - under);
    if (excess > 0.0) {
      const double d = 2.0 * o.lambda_sat * excess;
      channel(g.color, s.argmin) += d * (-1.0 / s.max);
      channel(g.color, s.argmax) += d * (s.min / (s.max * s.max));
    }
  }
  return total;
}

}  // namespace

double regularizer(const SgParams& params, const FitOptions& opts) {
  return regularize(params, opts, nullptr);
}

FitObjective::FitObjective(const EnvMap& env, const FitOptions& opts) : opts_(opts) {
  const std::size_t n = env.pixel_count();
  for (auto* v : {&dir_x_, &dir_y_, &dir_z_, &target_r_, &target_g_, &target_b_,
                  &model_r_, &model_g_, &model_b_, &res_r_, &res_g_, &res_b_}) {
    v->resize(n);
  }
  const int w = env.width();
  const int h = env.height();
  const auto px = env.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const Direction d = pixel_center_direction(x, y, h, w);
      dir_x_[i] = d.x();
      dir_y_[i] = d.y();
      dir_z_[i] = d.z();
      target_r_[i] = px[3 * i];
      target_g_[i] = px[3 * i + 1];
      target_b_[i] = px[3 * i + 2];
    }
  }
}

double FitObjective::data_term(const SgParams& params, bool keep_lobes) {
  const std::size_t n = pixel_count();
  std::fill(model_r_.begin(), model_r_.end(), 0.0);
  std::fill(model_g_.begin(), model_g_.end(), 0.0);
  std::fill(model_b_.begin(), model_b_.end(), 0.0);
  lobes_.resize(keep_lobes ? n * params.size() : n);
  unit_axes_.resize(params.size());

  const simd::DirectionsSoA dirs{dir_x_, dir_y_, dir_z_};
  const simd::ChannelsSoA model{model_r_, model_g_, model_b_};
  for (std::size_t k = 0; k < params.size(); ++k) {
    const RawLight& l = params[k];
    const double len = norm(l.axis);
    if (!(len > 0.0) || !std::isfinite(len) || !(l.sigma != 0.0)) {
      throw NumericalError("degenerate light parameters (zero axis or sigma)");
    }
    unit_axes_[k] = l.axis * (1.0 / len);
    std::span<double> lobe(lobes_.data() + (keep_lobes ? k * n : 0), n);
    simd::sg_lobe(dirs, unit_axes_[k], 1.0 / (l.sigma * l.sigma), lobe);
    simd::accumulate_lobe(lobe, l.color, model);
  }
  const double sq = simd::residual({model_r_, model_g_, model_b_},
                                   {target_r_, target_g_, target_b_},
                                   {res_r_, res_g_, res_b_});
  return opts_.lambda1 * sq;
}

double FitObjective::loss(const SgParams& params) {
  return data_term(params, false) + regularize(params, opts_, nullptr);
}

double FitObjective::loss_and_gradient(const SgParams& params, SgParams& grad) {
  const double data = data_term(params, true);
  const std::size_t n = pixel_count();
  grad.assign(params.size(), RawLight{{}, {}, 0.0});

  const simd::DirectionsSoA dirs{dir_x_, dir_y_, dir_z_};
  const simd::ConstChannelsSoA res{res_r_, res_g_, res_b_};
  const double two_l1 = 2.0 * opts_.lambda1;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const RawLight& l = params[k];
    const std::span<const double> lobe(lobes_.data() + k * n, n);
    const simd::LobeMoments m = simd::lobe_moments(lobe, res, l.color, dirs);
    RawLight& g = grad[k];
    g.color = {two_l1 * m.by_channel[0], two_l1 * m.by_channel[1],
               two_l1 * m.by_channel[2]};

    // d/d(unit axis) = 2 l1 / s^2 * T; project through the normalization.
    const double inv_s2 = 1.0 / (l.sigma * l.sigma);
    const Vec3& a = unit_axes_[k];
    const Vec3 t{m.by_axis[0], m.by_axis[1], m.by_axis[2]};
    const Vec3 d_unit = (two_l1 * inv_s2) * t;
    const double len = norm(l.axis);
    g.axis = (1.0 / len) * (d_unit - dot(a, d_unit) * a);

    // dG/ds = G * 2 (1 - w.a) / s^3, and sum_i (c.r_i) G_i (1 - w_i.a)
    // equals c.S - a.T.
    const double cs = l.color.r * m.by_channel[0] + l.color.g * m.by_channel[1] +
                      l.color.b * m.by_channel[2];
    g.sigma = two_l1 * 2.0 / (l.sigma * l.sigma * l.sigma) * (cs - dot(a, t));
  }
  return data + regularize(params, opts_, &grad);
}

double fit_loss(const SgParams& params, const EnvMap& env, const FitOptions& opts) {
  FitObjective obj(env, opts);
  return obj.loss(params);
}

SgParams loss_gradient(const SgParams& params, const EnvMap& env,
                       const FitOptions& opts) {
  FitObjective obj(env, opts);
  SgParams grad;
  obj.loss_and_gradient(params, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Fusion

namespace {

template <typename Light, typename Color, typename Axis, typename Sigma>
void fuse_in_place(std::vector<Light>& lights, Color color, Axis axis, Sigma sigma) {
  for (;;) {
    std::size_t best_i = 0, best_j = 0;
    double best_mass = -1.0;
    for (std::size_t i = 0; i < lights.size(); ++i) {
      const Vec3 ai = axis(lights[i]);
      for (std::size_t j = i + 1; j < lights.size(); ++j) {
        const Vec3 aj = axis(lights[j]);
        const double si = sigma(lights[i]);
        const double sj = sigma(lights[j]);
        if (1.0 - dot(ai, aj) >= 0.5 * (si * si + sj * sj)) continue;
        const double mass = l1(color(lights[i])) + l1(color(lights[j]));
        if (mass > best_mass) {
          best_mass = mass;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_mass < 0.0) return;
    std::size_t keep = best_i, drop = best_j;
    if (l1(color(lights[best_j])) > l1(color(lights[best_i]))) std::swap(keep, drop);
    color(lights[keep]) = color(lights[keep]) + color(lights[drop]);
    sigma(lights[keep]) = std::max(sigma(lights[keep]), sigma(lights[drop]));
    lights.erase(lights.begin() + static_cast<std::ptrdiff_t>(drop));
  }
}

Vec3 unit_or_zero(const Vec3& v) {
  const double n = norm(v);
  return n > 0.0 ? v * (1.0 / n) : Vec3{};
}

}  // namespace

SgParams nms_fuse(SgParams params) {
  fuse_in_place(
      params, [](RawLight& l) -> Rgb& { return l.color; },
      [](const RawLight& l) { return unit_or_zero(l.axis); },
      [](RawLight& l) -> double& { return l.sigma; });
  return params;
}

SgSet nms_fuse(const SgSet& set) {
  std::vector<SgSet::Entry> entries = set.entries();
  fuse_in_place(
      entries, [](SgSet::Entry& e) -> Rgb& { return e.light.color; },
      [](const SgSet::Entry& e) { return e.light.direction.vec(); },
      [](SgSet::Entry& e) -> double& { return e.light.sigma; });
  SgSet out;
  for (const auto& e : entries) out.insert(e.id, e.light);
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

bool PlateauSchedule::observe(double loss) {
  if (loss < best_) {
    best_ = loss;
    stall_ = 0;
    return false;
  }
  if (++stall_ >= patience_) {
    lr_ /= factor_;
    stall_ = 0;
    return true;
  }
  return false;
}

void PlateauSchedule::rebase(double loss) {
  best_ = loss;
  stall_ = 0;
}

FitResult fit(const EnvMap& env, const FitOptions& opts) {
  opts.validate();
  const EnvMap target = resample(env, opts.target_height);
  const Highlights hl = preprocess(target, opts);
  const auto components = connected_components(hl.mask, hl.width, hl.height);

  FitResult result;
  if (components.empty()) {
    result.trace.termination = Termination::kConverged;
    return result;
  }

  SgParams params = nms_fuse(to_params(init_lights(target, components, opts)));
  SgParams best = params;
  SgParams grad;
  FitObjective objective(target, opts);
  PlateauSchedule schedule(opts.learning_rate, opts.plateau_epochs,
                           opts.lr_decay_factor);
  FitTrace& trace = result.trace;
  trace.termination = Termination::kMaxEpochs;

  for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    const double loss = objective.loss_and_gradient(params, grad);
    if (!std::isfinite(loss)) {
      throw NumericalError("fit loss became non-finite at epoch " +
                           std::to_string(epoch) + " with learning rate " +
                           std::to_string(schedule.learning_rate()) +
                           "; try a smaller learning rate");
    }
    const double lr = schedule.learning_rate();
    if (loss < schedule.best_loss()) best = params;
    schedule.observe(loss);

    trace.loss.push_back(loss);
    trace.best_loss.push_back(schedule.best_loss());
    trace.learning_rate.push_back(lr);
    trace.light_count.push_back(static_cast<int>(params.size()));

    if (schedule.learning_rate() < opts.min_lr) {
      trace.termination = Termination::kLrFloor;
      break;
    }
    if (epoch > kConvergenceWindow) {
      const double past = trace.loss[trace.loss.size() - 1 - kConvergenceWindow];
      if (std::abs(past - loss) <= kConvergenceTolerance * std::abs(past)) {
        trace.termination = Termination::kConverged;
        break;
      }
    }

    for (std::size_t k = 0; k < params.size(); ++k) {
      params[k].color = params[k].color + (-lr) * grad[k].color;
      params[k].axis = params[k].axis - lr * grad[k].axis;
      // The kernel only sees sigma^2; keep the representative positive.
      params[k].sigma = std::abs(params[k].sigma - lr * grad[k].sigma);
    }
    if (epoch % opts.nms_interval == 0) {
      SgParams fused = nms_fuse(params);
      if (fused.size() < params.size()) {
        params = std::move(fused);
        best = params;
        schedule.rebase(objective.loss(params));
        trace.fuse_epochs.push_back(epoch);
      }
    }
  }

  for (RawLight& l : best) {
    l.color = {std::max(0.0, l.color.r), std::max(0.0, l.color.g), std::max(0.0, l.color.b)};
  }
  std::stable_sort(best.begin(), best.end(), [](const RawLight& a, const RawLight& b) {
    return l1(a.color) > l1(b.color);
  });
  result.lights = to_set(best);
  return result;
}

}  // namespace envlight
