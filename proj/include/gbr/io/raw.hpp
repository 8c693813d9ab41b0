#pragma once

// GBRR raster files: 4-byte magic "GBRR", u32 width, u32 height, u32
// channels (all little-endian), then float32 samples row-major with channels
// interleaved.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"

namespace gbr::io {

struct RawRaster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 0;
  std::vector<float> data;

  float at(std::uint32_t x, std::uint32_t y, std::uint32_t c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

inline constexpr std::array<char, 4> kRawMagic = {'G', 'B', 'R', 'R'};
inline constexpr std::size_t kRawHeaderBytes = 16;

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline void put_u32(std::array<unsigned char, 4>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
}

inline std::uint32_t get_u32(const unsigned char* in) {
  return static_cast<std::uint32_t>(in[0]) | (static_cast<std::uint32_t>(in[1]) << 8) |
         (static_cast<std::uint32_t>(in[2]) << 16) | (static_cast<std::uint32_t>(in[3]) << 24);
}

}  // namespace detail

inline void write_raw(const std::filesystem::path& path, const RawRaster& r) {
  if (r.data.size() != static_cast<std::size_t>(r.width) * r.height * r.channels) {
    throw std::invalid_argument("write_raw: data size does not match header");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kRawMagic.data(), 4);
  std::array<unsigned char, 4> word{};
  for (std::uint32_t v : {r.width, r.height, r.channels}) {
    detail::put_u32(word, v);
    out.write(reinterpret_cast<const char*>(word.data()), 4);
  }
  for (float f : r.data) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    detail::put_u32(word, bits);
    out.write(reinterpret_cast<const char*>(word.data()), 4);
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline RawRaster read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open raster '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < kRawHeaderBytes) {
    throw IoError("truncated raster '" + path.string() + "': header ends at byte offset " +
                  std::to_string(bytes.size()) + " (need 16)");
  }
  if (std::memcmp(bytes.data(), kRawMagic.data(), 4) != 0) {
    throw IoError("bad magic in raster '" + path.string() + "' at byte offset 0");
  }
  RawRaster r;
  r.width = detail::get_u32(bytes.data() + 4);
  r.height = detail::get_u32(bytes.data() + 8);
  r.channels = detail::get_u32(bytes.data() + 12);
  const std::size_t count = static_cast<std::size_t>(r.width) * r.height * r.channels;
  const std::size_t expected = kRawHeaderBytes + 4 * count;
  if (bytes.size() < expected) {
    throw IoError("truncated raster '" + path.string() + "': data ends at byte offset " +
                  std::to_string(bytes.size()) + ", expected " + std::to_string(expected) +
                  " bytes");
  }
  if (bytes.size() > expected) {
    throw IoError("trailing bytes in raster '" + path.string() + "' starting at byte offset " +
                  std::to_string(expected));
  }
  r.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    r.data[i] = std::bit_cast<float>(detail::get_u32(bytes.data() + kRawHeaderBytes + 4 * i));
  }
  return r;
}

inline RawRaster require_channels(RawRaster r, std::uint32_t channels,
                                  const std::filesystem::path& path) {
  if (r.channels != channels) {
    throw IoError("raster '" + path.string() + "' has " + std::to_string(r.channels) +
                  " channels, expected " + std::to_string(channels));
  }
  return r;
}

// Typed adapters.

inline RawRaster to_raw(const Raster<double>& r) {
  RawRaster out{static_cast<std::uint32_t>(r.width()), static_cast<std::uint32_t>(r.height()), 1,
                {}};
  out.data.reserve(r.size());
  for (double v : r.data()) out.data.push_back(static_cast<float>(v));
  return out;
}

inline RawRaster to_raw(const Raster<Vec3>& r) {
  RawRaster out{static_cast<std::uint32_t>(r.width()), static_cast<std::uint32_t>(r.height()), 3,
                {}};
  out.data.reserve(3 * r.size());
  for (const Vec3& v : r.data()) {
    for (int c = 0; c < 3; ++c) out.data.push_back(static_cast<float>(v[c]));
  }
  return out;
}

inline Raster<double> scalar_raster(const RawRaster& r) {
  Raster<double> out(static_cast<int>(r.width), static_cast<int>(r.height));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r.data[i];
  return out;
}

inline Raster<Vec3> vector_raster(const RawRaster& r) {
  Raster<Vec3> out(static_cast<int>(r.width), static_cast<int>(r.height));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Vec3(r.data[3 * i], r.data[3 * i + 1], r.data[3 * i + 2]);
  }
  return out;
}

inline Raster<double> load_scalar_raw(const std::filesystem::path& path) {
  return scalar_raster(require_channels(read_raw(path), 1, path));
}

inline Raster<Vec3> load_vector_raw(const std::filesystem::path& path) {
  return vector_raster(require_channels(read_raw(path), 3, path));
}

/// Depth rasters store 0 on invalid pixels.
inline void save_depth(const std::filesystem::path& path, const DepthMap& d) {
  Raster<double> values(d.width(), d.height(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (d.valid[i]) values[i] = d.depth[i];
  }
  write_raw(path, to_raw(values));
}

inline DepthMap load_depth(const std::filesystem::path& path) {
  return DepthMap::from_raster(load_scalar_raw(path));
}

/// Normal rasters store (0, 0, 0) on invalid pixels.
inline void save_normals(const std::filesystem::path& path, const NormalMap& n) {
  Raster<Vec3> values(n.width(), n.height(), Vec3::Zero());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (n.valid[i]) values[i] = n.normals[i];
  }
  write_raw(path, to_raw(values));
}

inline NormalMap load_normals(const std::filesystem::path& path) {
  const Raster<Vec3> values = load_vector_raw(path);
  NormalMap out(values.width(), values.height());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double len = values[i].norm();
    if (values[i].allFinite() && len > 0.5) {
      out.normals[i] = values[i] / len;
      out.valid[i] = 1;
    }
  }
  return out;
}

}  // namespace gbr::io
