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

#include "envlight/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace envlight {

Image::Image(int width, int height) : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw DimensionError("image dimensions must be non-negative");
  }
  data_.assign(3 * pixel_count(), 0.0);
}

EnvMap::EnvMap(int height) {
  if (height < 1) throw DimensionError("environment map height must be >= 1");
  image_ = Image(2 * height, height);
}

void validate_radiance(const Rgb& c) {
  if (!std::isfinite(c.r) || !std::isfinite(c.g) || !std::isfinite(c.b)) {
    throw ValidationError("radiance must be finite", "color");
  }
  if (c.r < 0.0 || c.g < 0.0 || c.b < 0.0) {
    throw ValidationError("radiance must be non-negative", "color");
  }
}

EnvMap EnvMap::from_image(Image image) {
  if (image.height() < 1 || image.width() != 2 * image.height()) {
    throw DimensionError("environment map must satisfy W = 2H, got " +
                         std::to_string(image.width()) + "x" +
                         std::to_string(image.height()));
  }
  for (double v : image.data()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("environment map channels must be finite and >= 0",
                            "pixels");
    }
  }
  EnvMap env;
  env.image_ = std::move(image);
  return env;
}

void EnvMap::set(int x, int y, const Rgb& c) {
  validate_radiance(c);
  image_.set(x, y, c);
}

Rgb sample_bilinear(const Image& image, double u, double v, bool wrap_x) {
  const int w = image.width();
  const int h = image.height();
  const double fx = u - 0.5;
  const double fy = std::clamp(v - 0.5, 0.0, static_cast<double>(h - 1));
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double tx = fx - x0f;
  const double ty = fy - y0f;
  int x0 = static_cast<int>(x0f);
  int x1 = x0 + 1;
  const int y0 = static_cast<int>(y0f);
  const int y1 = std::min(y0 + 1, h - 1);
  if (wrap_x) {
    x0 = ((x0 % w) + w) % w;
    x1 = ((x1 % w) + w) % w;
  } else {
    x0 = std::clamp(x0, 0, w - 1);
    x1 = std::clamp(x1, 0, w - 1);
  }
  const Rgb a = image.at(x0, y0);
  const Rgb b = image.at(x1, y0);
  const Rgb c = image.at(x0, y1);
  const Rgb d = image.at(x1, y1);
  return (1.0 - ty) * ((1.0 - tx) * a + tx * b) + ty * ((1.0 - tx) * c + tx * d);
}

EnvMap resample(const EnvMap& env, int height) {
  if (height < 1) throw DimensionError("resample height must be >= 1");
  if (height == env.height()) return env;
  Image out(2 * height, height);
  if (env.height() % height == 0) {
    const int f = env.height() / height;
    const double inv = 1.0 / (static_cast<double>(f) * f);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < 2 * height; ++x) {
        Rgb acc;
        for (int dy = 0; dy < f; ++dy) {
          for (int dx = 0; dx < f; ++dx) acc += env.at(x * f + dx, y * f + dy);
        }
        out.set(x, y, acc * inv);
      }
    }
  } else {
    const double sx = static_cast<double>(env.width()) / (2.0 * height);
    const double sy = static_cast<double>(env.height()) / height;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < 2 * height; ++x) {
        out.set(x, y,
                sample_bilinear(env.image(), (x + 0.5) * sx, (y + 0.5) * sy, true));
      }
    }
  }
  return EnvMap::from_image(std::move(out));
}

}  // namespace envlight
