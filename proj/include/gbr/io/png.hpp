#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"

namespace gbr::io {

namespace detail {

inline std::vector<std::uint8_t> read_png_bytes(const std::filesystem::path& path,
                                                png_uint_32 format, int& width, int& height) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  width = static_cast<int>(image.width);
  height = static_cast<int>(image.height);
  return buffer;
}

inline void write_png_bytes(const std::filesystem::path& path, png_uint_32 format, int width,
                            int height, const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

inline std::uint8_t to_byte(double v) {
  if (!std::isfinite(v)) v = 0.0;
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

inline RgbImage read_png_rgb(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = detail::read_png_bytes(path, PNG_FORMAT_RGB, w, h);
  RgbImage out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Vec3(bytes[3 * i], bytes[3 * i + 1], bytes[3 * i + 2]) / 255.0;
  }
  return out;
}

inline Mask read_png_gray(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = detail::read_png_bytes(path, PNG_FORMAT_GRAY, w, h);
  Mask out(w, h);
  std::copy(bytes.begin(), bytes.end(), out.data().begin());
  return out;
}

inline void write_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
  std::vector<std::uint8_t> bytes(3 * img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) bytes[3 * i + c] = detail::to_byte(img[i][c]);
  }
  detail::write_png_bytes(path, PNG_FORMAT_RGB, img.width(), img.height(), bytes);
}

inline void write_png_gray(const std::filesystem::path& path, const Mask& m) {
  std::vector<std::uint8_t> bytes(m.data().begin(), m.data().end());
  detail::write_png_bytes(path, PNG_FORMAT_GRAY, m.width(), m.height(), bytes);
}

}  // namespace gbr::io
