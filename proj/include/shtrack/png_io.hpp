// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "shtrack/synthdata.hpp"

namespace shtrack {

class PngError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct PngImage {
  png_image img;
  PngImage() {
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

}  // namespace detail

/// Decodes any PNG to 8-bit RGB (alpha and palette are flattened by libpng).
inline ImageBuffer read_png(const std::filesystem::path& path) {
  detail::PngImage p;
  if (!png_image_begin_read_from_file(&p.img, path.string().c_str())) {
    throw PngError("cannot read PNG " + path.string() + ": " + p.img.message);
  }
  p.img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, rgb.data(), 0, nullptr)) {
    throw PngError("cannot decode PNG " + path.string() + ": " + p.img.message);
  }
  return from_rgb8(rgb, static_cast<int>(p.img.width), static_cast<int>(p.img.height));
}

/// Encodes as 8-bit RGB; values are quantized with `quantize`.
inline void write_png(const std::filesystem::path& path, const ImageBuffer& img) {
  detail::PngImage p;
  p.img.width = static_cast<png_uint_32>(img.width());
  p.img.height = static_cast<png_uint_32>(img.height());
  p.img.format = PNG_FORMAT_RGB;
  const std::vector<std::uint8_t> rgb = to_rgb8(img);
  if (!png_image_write_to_file(&p.img, path.string().c_str(), 0, rgb.data(), 0, nullptr)) {
    throw PngError("cannot write PNG " + path.string() + ": " + p.img.message);
  }
}

}  // namespace shtrack
