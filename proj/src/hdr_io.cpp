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

#include "envlight/hdr_io.hpp"

#include <fnmatch.h>
#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>

#include "json.hpp"

namespace envlight {

namespace {

constexpr std::size_t kMaxPixels = std::size_t{1} << 28;

void check_dims(long long w, long long h, std::size_t offset) {
  if (w <= 0 || h <= 0 || static_cast<unsigned long long>(w) * h > kMaxPixels) {
    throw ParseError("image dimensions out of range", offset);
  }
}

// ---------------------------------------------------------------------------
// RGBE

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ >= bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t byte(const char* what) {
    if (at_end()) throw ParseError(std::string("truncated ") + what, pos_);
    return bytes_[pos_++];
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (remaining() < n) throw ParseError(std::string("truncated ") + what, pos_);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  /// Line without the trailing '\n'.
  std::string_view line(const char* what) {
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
    if (pos_ >= bytes_.size()) throw ParseError(std::string("unterminated ") + what, start);
    std::string_view s(reinterpret_cast<const char*>(bytes_.data()) + start, pos_ - start);
    ++pos_;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_rle_channel(const std::uint8_t* data, int n, Bytes& out) {
  int cur = 0;
  while (cur < n) {
    int beg_run = cur;
    int run_count = 0;
    int old_run_count = 0;
    while (run_count < 4 && beg_run < n) {
      beg_run += run_count;
      old_run_count = run_count;
      run_count = 1;
      while (beg_run + run_count < n && run_count < 127 &&
             data[beg_run] == data[beg_run + run_count]) {
        ++run_count;
      }
    }
    if (old_run_count > 1 && old_run_count == beg_run - cur) {
      out.push_back(static_cast<std::uint8_t>(128 + old_run_count));
      out.push_back(data[cur]);
      cur = beg_run;
    }
    while (cur < beg_run) {
      const int literal = std::min(128, beg_run - cur);
      out.push_back(static_cast<std::uint8_t>(literal));
      out.insert(out.end(), data + cur, data + cur + literal);
      cur += literal;
    }
    if (run_count >= 4) {
      out.push_back(static_cast<std::uint8_t>(128 + run_count));
      out.push_back(data[beg_run]);
      cur += run_count;
    }
  }
}

void parse_resolution(std::string_view line, std::size_t offset, int& w, int& h) {
  // Only the standard top-to-bottom, left-to-right orientation.
  if (!line.starts_with("-Y ")) {
    throw ParseError("unsupported orientation '" + std::string(line) + "'", offset);
  }
  auto parse_int = [&](std::string_view s, std::size_t& pos) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), v);
    if (ec != std::errc() || v <= 0 || v > (1 << 30)) {
      throw ParseError("bad resolution line '" + std::string(line) + "'", offset);
    }
    pos = static_cast<std::size_t>(ptr - s.data());
    return static_cast<int>(v);
  };
  std::size_t pos = 3;
  h = parse_int(line, pos);
  if (line.substr(pos, 4) != " +X ") {
    throw ParseError("unsupported orientation '" + std::string(line) + "'", offset);
  }
  pos += 4;
  w = parse_int(line, pos);
  if (pos != line.size()) {
    throw ParseError("trailing data in resolution line", offset);
  }
  check_dims(w, h, offset);
}

void read_rle_scanline(Reader& in, int width, std::vector<RgbePixel>& line) {
  for (int c = 0; c < 4; ++c) {
    int x = 0;
    while (x < width) {
      const std::size_t at = in.offset();
      int count = in.byte("scanline");
      if (count > 128) {
        count -= 128;
        if (count > width - x) throw ParseError("RLE run overflows the scanline", at);
        const std::uint8_t v = in.byte("scanline");
        for (int i = 0; i < count; ++i) (&line[x + i].r)[c] = v;
      } else {
        if (count == 0 || count > width - x) {
          throw ParseError("bad RLE literal count", at);
        }
        const auto bytes = in.take(static_cast<std::size_t>(count), "scanline");
        for (int i = 0; i < count; ++i) (&line[x + i].r)[c] = bytes[i];
      }
      x += count;
    }
  }
}

}  // namespace

RgbePixel rgbe_encode(const Rgb& c) {
  if (!std::isfinite(c.r) || !std::isfinite(c.g) || !std::isfinite(c.b) || c.r < 0.0 ||
      c.g < 0.0 || c.b < 0.0) {
    throw ValidationError("RGBE encodes only finite non-negative values", "color");
  }
  const double v = std::max({c.r, c.g, c.b});
  if (v < 1e-32) return {};
  int e = 0;
  const double mantissa = std::frexp(v, &e);
  if (e + 128 > 255) throw ValidationError("value too large for RGBE", "color");
  const double scale = mantissa * 256.0 / v;
  return {static_cast<std::uint8_t>(c.r * scale), static_cast<std::uint8_t>(c.g * scale),
          static_cast<std::uint8_t>(c.b * scale), static_cast<std::uint8_t>(e + 128)};
}

Rgb rgbe_decode(const RgbePixel& p) {
  if (p.e == 0) return {};
  const double f = std::ldexp(1.0, static_cast<int>(p.e) - (128 + 8));
  return {(p.r + 0.5) * f, (p.g + 0.5) * f, (p.b + 0.5) * f};
}

Bytes encode_hdr(const Image& image) {
  if (image.empty()) throw DimensionError("cannot encode an empty image");
  const int w = image.width();
  const int h = image.height();
  const std::string header = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " +
                             std::to_string(h) + " +X " + std::to_string(w) + "\n";
  Bytes out(header.begin(), header.end());
  const bool rle = w >= 8 && w < 0x8000;
  std::vector<std::uint8_t> planes(4 * static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const RgbePixel p = rgbe_encode(image.at(x, y));
      planes[x] = p.r;
      planes[w + x] = p.g;
      planes[2 * w + x] = p.b;
      planes[3 * w + x] = p.e;
    }
    if (!rle) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 4; ++c) out.push_back(planes[c * w + x]);
      }
      continue;
    }
    out.push_back(2);
    out.push_back(2);
    out.push_back(static_cast<std::uint8_t>(w >> 8));
    out.push_back(static_cast<std::uint8_t>(w & 0xff));
    for (int c = 0; c < 4; ++c) write_rle_channel(&planes[c * w], w, out);
  }
  return out;
}

Image decode_hdr(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const std::string_view magic = in.line("header");
  if (magic != "#?RADIANCE" && magic != "#?RGBE") {
    throw ParseError("not a Radiance file (bad magic)", 0);
  }
  for (;;) {
    const std::size_t at = in.offset();
    const std::string_view line = in.line("header");
    if (line.empty()) break;
    if (line.starts_with("FORMAT=") && line != "FORMAT=32-bit_rle_rgbe") {
      throw ParseError("unsupported pixel format '" + std::string(line) + "'", at);
    }
  }
  int w = 0, h = 0;
  const std::size_t res_at = in.offset();
  parse_resolution(in.line("resolution line"), res_at, w, h);

  Image image(w, h);
  std::vector<RgbePixel> line(static_cast<std::size_t>(w));
  bool flat = w < 8 || w >= 0x8000;
  for (int y = 0; y < h; ++y) {
    if (flat) {
      const auto raw = in.take(4 * static_cast<std::size_t>(w), "scanline");
      for (int x = 0; x < w; ++x) line[x] = {raw[4 * x], raw[4 * x + 1], raw[4 * x + 2], raw[4 * x + 3]};
    } else {
      const std::size_t at = in.offset();
      const auto head = in.take(4, "scanline");
      if (head[0] != 2 || head[1] != 2 || (head[2] & 0x80) != 0) {
        // Flat file: this pixel and everything after it is uncompressed.
        flat = true;
        line[0] = {head[0], head[1], head[2], head[3]};
        const auto raw = in.take(4 * static_cast<std::size_t>(w - 1), "scanline");
        for (int x = 1; x < w; ++x) {
          line[x] = {raw[4 * (x - 1)], raw[4 * (x - 1) + 1], raw[4 * (x - 1) + 2],
                     raw[4 * (x - 1) + 3]};
        }
      } else {
        if (((head[2] << 8) | head[3]) != w) throw ParseError("scanline width mismatch", at);
        read_rle_scanline(in, w, line);
      }
    }
    for (int x = 0; x < w; ++x) image.set(x, y, rgbe_decode(line[x]));
  }
  return image;
}

// ---------------------------------------------------------------------------
// PFM

Bytes encode_pfm(const Image& image) {
  if (image.empty()) throw DimensionError("cannot encode an empty image");
  const std::string header =
      "PF\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n-1.0\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + 12 * image.pixel_count());
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) {
      const Rgb c = image.at(x, y);
      for (double v : {c.r, c.g, c.b}) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
      }
    }
  }
  return out;
}

Image decode_pfm(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto token = [&](const char* what) {
    while (!in.at_end() && std::isspace(bytes[in.offset()])) in.byte(what);
    const std::size_t start = in.offset();
    while (!in.at_end() && !std::isspace(bytes[in.offset()])) in.byte(what);
    if (in.offset() == start) throw ParseError(std::string("missing ") + what, start);
    return std::pair{std::string(reinterpret_cast<const char*>(bytes.data()) + start,
                                 in.offset() - start),
                     start};
  };
  const auto [magic, magic_at] = token("PFM magic");
  if (magic == "Pf") throw ParseError("grayscale PFM ('Pf') is not supported", magic_at);
  if (magic != "PF") throw ParseError("not a color PFM (bad magic)", magic_at);
  auto integer = [&](const char* what) {
    const auto [text, at] = token(what);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ParseError(std::string("bad ") + what, at);
    }
    return std::pair{v, at};
  };
  const auto [w, w_at] = integer("PFM width");
  const auto [h, h_at] = integer("PFM height");
  check_dims(w, h, w_at);
  const auto [scale_text, scale_at] = token("PFM scale");
  double scale = 0.0;
  {
    const auto [ptr, ec] =
        std::from_chars(scale_text.data(), scale_text.data() + scale_text.size(), scale);
    if (ec != std::errc() || ptr != scale_text.data() + scale_text.size() || scale == 0.0 ||
        !std::isfinite(scale)) {
      throw ParseError("bad PFM scale", scale_at);
    }
  }
  in.byte("PFM header");  // single whitespace before the raster
  const bool little = scale < 0.0;
  const auto raw = in.take(12 * static_cast<std::size_t>(w) * h, "PFM raster");
  Image image(static_cast<int>(w), static_cast<int>(h));
  std::size_t k = 0;
  for (long long y = h - 1; y >= 0; --y) {
    for (long long x = 0; x < w; ++x) {
      double c[3];
      for (double& v : c) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
          const std::uint32_t byte = raw[k + b];
          bits |= little ? byte << (8 * b) : byte << (8 * (3 - b));
        }
        k += 4;
        v = std::bit_cast<float>(bits);
      }
      image.set(static_cast<int>(x), static_cast<int>(y), {c[0], c[1], c[2]});
    }
  }
  return image;
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == '#' && bytes[1] == '?') return decode_hdr(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == 'F' || bytes[1] == 'f')) {
    return decode_pfm(bytes);
  }
  throw ParseError("unrecognized image format (expected Radiance .hdr or PFM)", 0);
}

// ---------------------------------------------------------------------------
// PNG

Bytes encode_png(const Image& ldr) {
  if (ldr.empty()) throw DimensionError("cannot encode an empty image");
  std::vector<std::uint8_t> pixels(3 * ldr.pixel_count());
  const auto data = ldr.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = data[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("PNG export expects values in [0, 1]", "pixels");
    }
    pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * v));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(ldr.width());
  img.height = static_cast<png_uint_32>(ldr.height());
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoding failed: ") + img.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoding failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw ParseError(std::string("bad PNG: ") + img.message, 0);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
    throw ParseError(std::string("bad PNG: ") + img.message, 0);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height));
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = pixels[i] / 255.0;
  return out;
}

// ---------------------------------------------------------------------------
// Files

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  Bytes out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("cannot read '" + path.string() + "'");
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("cannot write '" + path.string() + "'");
}

Image read_image(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  const std::string ext = path.extension().string();
  if (ext == ".hdr" || ext == ".HDR") return decode_hdr(bytes);
  if (ext == ".pfm" || ext == ".PFM") return decode_pfm(bytes);
  return decode_image(bytes);
}

EnvMap read_hdr(const std::filesystem::path& path) {
  return EnvMap::from_image(decode_hdr(read_file(path)));
}

void write_hdr(const std::filesystem::path& path, const Image& image) {
  write_file(path, encode_hdr(image));
}

EnvMap read_pfm(const std::filesystem::path& path) {
  return EnvMap::from_image(decode_pfm(read_file(path)));
}

void write_pfm(const std::filesystem::path& path, const Image& image) {
  write_file(path, encode_pfm(image));
}

void export_png(const Image& ldr, const std::filesystem::path& path) {
  write_file(path, encode_png(ldr));
}

EnvMap read_env(const std::filesystem::path& path) {
  return EnvMap::from_image(read_image(path));
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string DatasetIndex::to_json() const {
  nlohmann::json doc = nlohmann::json::object();
  doc["format"] = format;
  doc["entries"] = nlohmann::json::array();
  for (const DatasetEntry& e : entries) {
    nlohmann::json j = {{"path", e.path}, {"width", e.width}, {"height", e.height},
                        {"sha256", e.sha256}};
    if (!e.error.empty()) j["error"] = e.error;
    doc["entries"].push_back(std::move(j));
  }
  return doc.dump(2);
}

DatasetIndex ingest_dir(const std::filesystem::path& dir, std::string_view pattern) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw IoError("'" + dir.string() + "' is not a readable directory");
  }
  const std::string pat(pattern.empty() ? "*" : pattern);
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (fnmatch(pat.c_str(), name.c_str(), 0) == 0) files.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list '" + dir.string() + "': " + ec.message());
  std::sort(files.begin(), files.end());

  DatasetIndex index;
  bool any_hdr = false, any_pfm = false;
  for (const auto& path : files) {
    DatasetEntry e;
    e.path = path.string();
    try {
      const Bytes bytes = read_file(path);
      e.sha256 = sha256_hex(bytes);
      const Image img = decode_image(bytes);
      e.width = img.width();
      e.height = img.height();
      (bytes[0] == '#' ? any_hdr : any_pfm) = true;
    } catch (const IoError& err) {
      e.error = std::string("error:io: ") + err.what();
    } catch (const Error& err) {
      e.error = std::string("error:parse: ") + err.what();
    }
    index.entries.push_back(std::move(e));
  }
  index.format = any_hdr && any_pfm ? "mixed" : any_hdr ? "hdr" : any_pfm ? "pfm" : "empty";
  return index;
}

}  // namespace envlight
