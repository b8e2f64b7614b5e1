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

#include "envlight/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace envlight {

namespace {

constexpr double kPi = std::numbers::pi;

void check_pano_dims(int height, int width) {
  if (height < 1 || width != 2 * height) {
    throw DimensionError("equirectangular grid must satisfy W = 2H, got " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m[1][1] = c;
  r.m[1][2] = -s;
  r.m[2][1] = s;
  r.m[2][2] = c;
  return r;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m[0][0] = c;
  r.m[0][2] = s;
  r.m[2][0] = -s;
  r.m[2][2] = c;
  return r;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m[0][0] = c;
  r.m[0][1] = -s;
  r.m[1][0] = s;
  r.m[1][1] = c;
  return r;
}

double focal_length(double fov, int extent) {
  return 0.5 * extent / std::tan(0.5 * fov);
}

}  // namespace

Direction pixel_to_direction(double u, double v, int height, int width) {
  if (!(u >= 0.0 && u <= width) || !(v >= 0.0 && v <= height)) {
    throw DomainError("pixel coordinate outside the panorama");
  }
  const double phi = 2.0 * kPi * u / width - kPi;
  const double theta = kPi * v / height;
  const double st = std::sin(theta);
  return Direction::unchecked({st * std::sin(phi), std::cos(theta), st * std::cos(phi)});
}

PixelCoord direction_to_pixel(const Vec3& d, int height, int width) {
  const double n = norm(d);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DomainError("direction_to_pixel needs a non-zero finite vector");
  }
  const double theta = std::acos(std::clamp(d.y / n, -1.0, 1.0));
  const double phi = (d.x == 0.0 && d.z == 0.0) ? 0.0 : std::atan2(d.x, d.z);
  double u = width * (phi + kPi) / (2.0 * kPi);
  if (u >= width) u -= width;
  if (u < 0.0) u += width;
  return {u, height * theta / kPi};
}

std::vector<double> solid_angle_map(int height, int width) {
  check_pano_dims(height, width);
  std::vector<double> w(static_cast<std::size_t>(height) * width);
  const double dphi = 2.0 * kPi / width;
  for (int v = 0; v < height; ++v) {
    const double row =
        dphi * (std::cos(kPi * v / height) - std::cos(kPi * (v + 1) / height));
    std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(v) * width, width, row);
  }
  return w;
}

Rgb sample_direction(const EnvMap& env, const Vec3& d) {
  const PixelCoord p = direction_to_pixel(d, env.height(), env.width());
  return sample_bilinear(env.image(), p.u, p.v, true);
}

void CameraPose::validate() const {
  if (!(horizontal_fov > 0.0 && horizontal_fov < kPi)) {
    throw DomainError("horizontal field of view must lie in (0, pi)");
  }
  if (!(elevation > -kPi / 2 && elevation < kPi / 2)) {
    throw DomainError("camera elevation must lie in (-pi/2, pi/2)");
  }
  if (!(roll > -kPi && roll <= kPi)) {
    throw DomainError("camera roll must lie in (-pi, pi]");
  }
  if (!std::isfinite(azimuth)) throw DomainError("camera azimuth must be finite");
}

Mat3 camera_to_world(const CameraPose& cam) {
  return rot_y(cam.azimuth) * rot_x(-cam.elevation) * rot_z(cam.roll);
}

MaskedPano warp_image_to_pano(const Image& image, const CameraPose& cam,
                              int out_height) {
  if (image.empty()) throw DimensionError("cannot warp an empty image");
  if (out_height < 16) throw DimensionError("panorama height must be >= 16");
  cam.validate();

  const int w_out = 2 * out_height;
  const Mat3 world_to_cam = camera_to_world(cam).transposed();
  const double f = focal_length(cam.horizontal_fov, image.width());
  const double cx = 0.5 * image.width();
  const double cy = 0.5 * image.height();

  Image pano(w_out, out_height);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w_out) * out_height, 0);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < w_out; ++x) {
      const Vec3 c = world_to_cam * pixel_center_direction(x, y, out_height, w_out).vec();
      if (c.z <= 0.0) continue;
      const double col = cx + f * c.x / c.z;
      const double row = cy - f * c.y / c.z;
      if (col < 0.0 || col > image.width() || row < 0.0 || row > image.height()) {
        continue;
      }
      pano.set(x, y, sample_bilinear(image, col, row, false));
      mask[static_cast<std::size_t>(y) * w_out + x] = 1;
    }
  }
  return {EnvMap::from_image(std::move(pano)), std::move(mask)};
}

Image extract_view(const EnvMap& pano, const CameraPose& cam, int out_width,
                   int out_height) {
  cam.validate();
  if (out_width < 1 || out_height < 1) {
    throw DimensionError("view dimensions must be positive");
  }
  const Mat3 cam_to_world = camera_to_world(cam);
  const double f = focal_length(cam.horizontal_fov, out_width);
  Image out(out_width, out_height);
  for (int j = 0; j < out_height; ++j) {
    for (int i = 0; i < out_width; ++i) {
      const Vec3 c{(i + 0.5) - 0.5 * out_width, 0.5 * out_height - (j + 0.5), f};
      out.set(i, j, sample_direction(pano, cam_to_world * c));
    }
  }
  return out;
}

EnvMap composite_known(const EnvMap& generated, const MaskedPano& input) {
  if (generated.height() != input.env.height() ||
      input.mask.size() != input.env.pixel_count()) {
    throw DimensionError("composite_known: dimension mismatch");
  }
  Image out = generated.image();
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (input.observed(x, y)) out.set(x, y, input.env.at(x, y));
    }
  }
  return EnvMap::from_image(std::move(out));
}

EnvMap rotate_azimuth(const EnvMap& env, double radians) {
  const double shift = radians / (2.0 * kPi) * env.width();
  Image out(env.width(), env.height());
  for (int y = 0; y < env.height(); ++y) {
    for (int x = 0; x < env.width(); ++x) {
      out.set(x, y, sample_bilinear(env.image(), x + 0.5 - shift, y + 0.5, true));
    }
  }
  return EnvMap::from_image(std::move(out));
}

}  // namespace envlight
