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

// File codecs. Radiance RGBE (.hdr, flat and new-style RLE scanlines) and
// color PFM for HDR data, 8-bit RGB PNG for tonemapped output. Every decoder
// works on a byte buffer and reports malformed input as ParseError with the
// byte offset where decoding stopped; the path-based helpers only add file
// I/O (IoError).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "envlight/image.hpp"

namespace envlight {

using Bytes = std::vector<std::uint8_t>;

struct RgbePixel {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  std::uint8_t e = 0;
  friend bool operator==(const RgbePixel&, const RgbePixel&) = default;
};

/// Shared-exponent encoding. ValidationError for negative, non-finite or
/// out-of-range (>= 2^127) input; values below 1e-32 encode as zero.
RgbePixel rgbe_encode(const Rgb& c);
/// Decodes to mantissa bin centers, so decode(encode(x)) is within
/// max(x)/256 of x per channel.
Rgb rgbe_decode(const RgbePixel& p);

Bytes encode_hdr(const Image& image);
Image decode_hdr(std::span<const std::uint8_t> bytes);

Bytes encode_pfm(const Image& image);
Image decode_pfm(std::span<const std::uint8_t> bytes);

/// Picks the decoder from the leading magic bytes ("#?" or "PF").
Image decode_image(std::span<const std::uint8_t> bytes);

/// 8-bit RGB PNG; channels must lie in [0, 1] and quantize as round(255 x).
Bytes encode_png(const Image& ldr);
Image decode_png(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

Image read_image(const std::filesystem::path& path);
EnvMap read_hdr(const std::filesystem::path& path);
void write_hdr(const std::filesystem::path& path, const Image& image);
EnvMap read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Image& image);
void export_png(const Image& ldr, const std::filesystem::path& path);
/// Reads .hdr or .pfm by extension (falls back to magic sniffing) and checks
/// the equirectangular invariants.
EnvMap read_env(const std::filesystem::path& path);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

struct DatasetEntry {
  std::string path;
  int width = 0;
  int height = 0;
  std::string sha256;
  std::string error;  // empty when the file decoded
};

struct DatasetIndex {
  std::string format;  // "hdr", "pfm", "mixed" or "empty"
  std::vector<DatasetEntry> entries;

  std::string to_json() const;
};

/// Lists regular files in `dir` whose names match the glob `pattern`, in
/// lexicographic order. Files that fail to read or decode stay in the index
/// with an error tag.
DatasetIndex ingest_dir(const std::filesystem::path& dir, std::string_view pattern);

}  // namespace envlight
