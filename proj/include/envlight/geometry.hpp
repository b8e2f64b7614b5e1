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

// Equirectangular conventions used across the library:
//   phi   = 2*pi*u/W - pi   (azimuth, 0 at the panorama center)
//   theta = pi*v/H          (polar angle from +y)
//   dir   = (sin(theta) sin(phi), cos(theta), sin(theta) cos(phi))
// so the panorama center looks down +z, the top row is the zenith (+y) and
// u = 3W/4 faces +x. Pixel (x, y) has its center at (x + 0.5, y + 0.5).

#include <cstdint>
#include <vector>

#include "envlight/image.hpp"
#include "envlight/vec.hpp"

namespace envlight {

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Throws DomainError when (u, v) lies outside [0, W] x [0, H].
Direction pixel_to_direction(double u, double v, int height, int width);

/// Inverse of pixel_to_direction. `u` is wrapped into [0, W); at the poles
/// the azimuth is taken as 0 (u = W/2). Accepts any non-zero vector.
PixelCoord direction_to_pixel(const Vec3& d, int height, int width);

/// Direction through the center of pixel (x, y).
inline Direction pixel_center_direction(int x, int y, int height, int width) {
  return pixel_to_direction(x + 0.5, y + 0.5, height, width);
}

/// Per-pixel solid angle in steradians, row-major H x W. Sums to 4*pi.
std::vector<double> solid_angle_map(int height, int width);

/// Bilinear environment lookup along a direction.
Rgb sample_direction(const EnvMap& env, const Vec3& d);

struct CameraPose {
  double horizontal_fov = 1.0471975511965976;  // radians
  double elevation = 0.0;
  double roll = 0.0;
  double azimuth = 0.0;

  void validate() const;
};

/// Camera-to-world rotation: yaw by azimuth about +y, then pitch by
/// elevation (positive looks up), then roll about the viewing axis. The
/// camera looks down +z with +y up and +x to the right.
Mat3 camera_to_world(const CameraPose& cam);

struct MaskedPano {
  EnvMap env;
  std::vector<std::uint8_t> mask;  // H*W, 1 = observed

  bool observed(int x, int y) const {
    return mask[static_cast<std::size_t>(y) * env.width() + x] != 0;
  }
};

/// Back-projects every panorama pixel into the pinhole camera and samples the
/// image bilinearly where it lands inside the frame. Principal point at the
/// image center, square pixels.
MaskedPano warp_image_to_pano(const Image& image, const CameraPose& cam,
                              int out_height);

/// Pinhole crop of a panorama; the sampling inverse of warp_image_to_pano.
Image extract_view(const EnvMap& pano, const CameraPose& cam, int out_width,
                   int out_height);

/// Observed pixels from `input`, everything else from `generated`.
EnvMap composite_known(const EnvMap& generated, const MaskedPano& input);

/// Rotate the environment about +y by `radians` (content moves toward +phi).
EnvMap rotate_azimuth(const EnvMap& env, double radians);

}  // namespace envlight
