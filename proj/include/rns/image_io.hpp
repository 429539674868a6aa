// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rns/render.hpp"

namespace rns {

// 8-bit RGB, row-major from the top-left pixel.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

// Float image, row-major from the top-left pixel, 1 or 3 channels.
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  float at(int row, int col, int c) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + c];
  }
};

inline constexpr double kDisplayGamma = 2.2;

// Clamp to [0,1], encode with gamma 2.2 and quantise.
std::uint8_t encode_display(double linear);
Image8 to_rgb8(const FrameBuffer& fb);

// Binary PPM (P6, maxval 255).
std::string encode_ppm(const Image8& img);
void write_ppm(const std::filesystem::path& path, const Image8& img);

// PFM ("PF" colour / "Pf" grey, little-endian, rows stored bottom-up on disk).
std::string encode_pfm(const FloatImage& img);
FloatImage decode_pfm(const std::string& bytes);
void write_pfm(const std::filesystem::path& path, const FloatImage& img);
FloatImage read_pfm(const std::filesystem::path& path);

FloatImage depth_image(const FrameBuffer& fb);

}  // namespace rns
