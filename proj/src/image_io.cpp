// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#include "rns/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "rns/fileutil.hpp"

namespace rns {

std::uint8_t encode_display(double linear) {
  const double v = std::isfinite(linear) ? std::clamp(linear, 0.0, 1.0) : 0.0;
  return static_cast<std::uint8_t>(std::lround(255.0 * std::pow(v, 1.0 / kDisplayGamma)));
}

Image8 to_rgb8(const FrameBuffer& fb) {
  Image8 img{fb.width, fb.height, std::vector<std::uint8_t>(fb.rgb.size())};
  std::transform(fb.rgb.begin(), fb.rgb.end(), img.data.begin(), [](float v) { return encode_display(v); });
  return img;
}

std::string encode_ppm(const Image8& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image8& img) { write_file_atomic(path, encode_ppm(img)); }

std::string encode_pfm(const FloatImage& img) {
  if (img.channels != 1 && img.channels != 3) throw InputError("PFM needs 1 or 3 channels");
  std::string out = std::string(img.channels == 3 ? "PF" : "Pf") + "\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n-1.0\n";
  const std::size_t row_floats = static_cast<std::size_t>(img.width) * img.channels;
  for (int row = img.height - 1; row >= 0; --row) {
    for (std::size_t i = 0; i < row_floats; ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(img.data[row * row_floats + i]);
      char buf[4];
      for (int b = 0; b < 4; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
      out.append(buf, 4);
    }
  }
  return out;
}

FloatImage decode_pfm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  FloatImage img;
  double scale = 0.0;
  in >> magic >> img.width >> img.height >> scale;
  if (!in || (magic != "PF" && magic != "Pf")) throw ParseError("not a PFM image", 0, 1);
  if (img.width <= 0 || img.height <= 0) throw ParseError("PFM has empty dimensions", 0, 2);
  in.get();  // the single whitespace byte after the scale
  img.channels = magic == "PF" ? 3 : 1;
  const auto start = static_cast<std::size_t>(in.tellg());
  const std::size_t row_floats = static_cast<std::size_t>(img.width) * img.channels;
  const std::size_t need = start + 4 * row_floats * img.height;
  if (bytes.size() < need) throw ParseError("PFM payload truncated", bytes.size());
  const bool little = scale < 0.0;
  img.data.resize(row_floats * img.height);
  std::size_t at = start;
  for (int row = img.height - 1; row >= 0; --row) {
    for (std::size_t i = 0; i < row_floats; ++i, at += 4) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        const auto byte = static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + b]));
        bits |= little ? byte << (8 * b) : byte << (8 * (3 - b));
      }
      img.data[row * row_floats + i] = std::bit_cast<float>(bits);
    }
  }
  return img;
}

void write_pfm(const std::filesystem::path& path, const FloatImage& img) { write_file_atomic(path, encode_pfm(img)); }

FloatImage read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

FloatImage depth_image(const FrameBuffer& fb) { return FloatImage{fb.width, fb.height, 1, fb.depth}; }

}  // namespace rns
