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
#include <span>
#include <vector>

#include "envlight/vec.hpp"

namespace envlight {

/// Row-major grid of linear RGB values, three interleaved doubles per pixel.
/// No aspect constraint; renders and crops use this directly.
class Image {
 public:
  Image() = default;
  Image(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const { return pixel_count() == 0; }
  bool same_size(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  Rgb at(int x, int y) const {
    const double* p = &data_[index(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, const Rgb& c) {
    double* p = &data_[index(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x));
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Equirectangular environment map: width is exactly twice the height and
/// every channel is finite and non-negative.
class EnvMap {
 public:
  EnvMap() = default;
  /// All-zero map of the given height.
  explicit EnvMap(int height);

  /// Validates aspect ratio and pixel values; throws DimensionError or
  /// ValidationError.
  static EnvMap from_image(Image image);

  int height() const { return image_.height(); }
  int width() const { return image_.width(); }
  std::size_t pixel_count() const { return image_.pixel_count(); }
  Rgb at(int x, int y) const { return image_.at(x, y); }
  /// Throws ValidationError on negative or non-finite channels.
  void set(int x, int y, const Rgb& c);

  const Image& image() const { return image_; }
  std::span<const double> data() const { return image_.data(); }

  friend bool operator==(const EnvMap&, const EnvMap&) = default;

 private:
  Image image_;
};

void validate_radiance(const Rgb& c);

/// Bilinear sample at continuous pixel coordinates (pixel centers at +0.5).
/// Columns wrap when `wrap_x`, otherwise clamp; rows always clamp.
Rgb sample_bilinear(const Image& image, double u, double v, bool wrap_x);

/// Resample to a new height. An integer reduction factor averages whole
/// pixel blocks; any other ratio samples bilinearly at the new pixel centers.
EnvMap resample(const EnvMap& env, int height);

}  // namespace envlight
