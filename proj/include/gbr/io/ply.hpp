#pragma once

// Minimal PLY reader/writer for point clouds and triangle meshes. Writes
// binary_little_endian (or ascii) with double-precision coordinates; reads
// ascii and binary_little_endian files with the common scalar types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gbr/core/error.hpp"
#include "gbr/core/geometry_types.hpp"

namespace gbr::io {

enum class PlyEncoding { kBinary, kAscii };

namespace detail {

struct PlyProperty {
  std::string name;
  std::string type;        // scalar type, or count type for lists
  std::string list_type;   // element type for lists, empty otherwise
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

inline std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" ||
      t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

template <typename T>
T load_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

inline double ply_read_binary(const std::string& t, const unsigned char* p) {
  if (t == "char" || t == "int8") return load_le<std::int8_t>(p);
  if (t == "uchar" || t == "uint8") return load_le<std::uint8_t>(p);
  if (t == "short" || t == "int16") return load_le<std::int16_t>(p);
  if (t == "ushort" || t == "uint16") return load_le<std::uint16_t>(p);
  if (t == "int" || t == "int32") return load_le<std::int32_t>(p);
  if (t == "uint" || t == "uint32") return load_le<std::uint32_t>(p);
  if (t == "float" || t == "float32") return load_le<float>(p);
  return load_le<double>(p);
}

template <typename T>
void append_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Rows of each element as doubles (lists flattened after their count).
struct PlyData {
  std::vector<PlyElement> elements;
  std::vector<std::vector<std::vector<double>>> rows;

  const PlyElement* find(const std::string& name, std::size_t* index) const {
    for (std::size_t i = 0; i < elements.size(); ++i) {
      if (elements[i].name == name) {
        *index = i;
        return &elements[i];
      }
    }
    return nullptr;
  }
};

inline PlyData read_ply_data(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PLY '" + path.string() + "'");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string end_marker = "end_header";
  const auto end_pos = content.find(end_marker);
  if (content.rfind("ply", 0) != 0 || end_pos == std::string::npos) {
    throw IoError("'" + path.string() + "' is not a PLY file");
  }
  std::size_t body = content.find('\n', end_pos);
  if (body == std::string::npos) throw IoError("truncated PLY header in '" + path.string() + "'");
  ++body;

  PlyData data;
  std::string format;
  std::istringstream header(content.substr(0, end_pos));
  std::string line;
  while (std::getline(header, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      ls >> format;
    } else if (key == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      data.elements.push_back(e);
    } else if (key == "property") {
      if (data.elements.empty()) throw IoError("PLY property before element in '" + path.string() + "'");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        ls >> p.type >> p.list_type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      data.elements.back().properties.push_back(p);
    }
  }
  if (format != "ascii" && format != "binary_little_endian") {
    throw IoError("unsupported PLY format '" + format + "' in '" + path.string() + "'");
  }

  data.rows.resize(data.elements.size());
  if (format == "ascii") {
    std::istringstream bs(content.substr(body));
    for (std::size_t ei = 0; ei < data.elements.size(); ++ei) {
      const auto& e = data.elements[ei];
      data.rows[ei].resize(e.count);
      for (std::size_t r = 0; r < e.count; ++r) {
        auto& row = data.rows[ei][r];
        for (const auto& p : e.properties) {
          double v = 0.0;
          if (!(bs >> v)) throw IoError("truncated PLY data in '" + path.string() + "'");
          row.push_back(v);
          if (!p.list_type.empty()) {
            const auto n = static_cast<std::size_t>(v);
            for (std::size_t k = 0; k < n; ++k) {
              if (!(bs >> v)) throw IoError("truncated PLY data in '" + path.string() + "'");
              row.push_back(v);
            }
          }
        }
      }
    }
  } else {
    const auto* p = reinterpret_cast<const unsigned char*>(content.data());
    std::size_t off = body;
    auto need = [&](std::size_t n) {
      if (off + n > content.size()) {
        throw IoError("truncated PLY data in '" + path.string() + "' at byte offset " +
                      std::to_string(content.size()));
      }
    };
    for (std::size_t ei = 0; ei < data.elements.size(); ++ei) {
      const auto& e = data.elements[ei];
      data.rows[ei].resize(e.count);
      for (std::size_t r = 0; r < e.count; ++r) {
        auto& row = data.rows[ei][r];
        for (const auto& prop : e.properties) {
          const std::size_t sz = ply_type_size(prop.type);
          if (sz == 0) throw IoError("unknown PLY type '" + prop.type + "'");
          need(sz);
          const double v = ply_read_binary(prop.type, p + off);
          off += sz;
          row.push_back(v);
          if (!prop.list_type.empty()) {
            const std::size_t esz = ply_type_size(prop.list_type);
            const auto n = static_cast<std::size_t>(v);
            need(esz * n);
            for (std::size_t k = 0; k < n; ++k) {
              row.push_back(ply_read_binary(prop.list_type, p + off));
              off += esz;
            }
          }
        }
      }
    }
  }
  return data;
}

inline int property_index(const PlyElement& e, const std::string& name) {
  for (std::size_t i = 0; i < e.properties.size(); ++i) {
    if (e.properties[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string vertex_header(std::size_t n, bool colors, bool normals) {
  std::string h = "element vertex " + std::to_string(n) +
                  "\nproperty double x\nproperty double y\nproperty double z\n";
  if (normals) h += "property double nx\nproperty double ny\nproperty double nz\n";
  if (colors) h += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  return h;
}

inline std::uint8_t color_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

inline void append_vertex(std::string& out, PlyEncoding enc, const Vec3& p, const Vec3* n,
                          const Vec3* c) {
  if (enc == PlyEncoding::kBinary) {
    for (int k = 0; k < 3; ++k) append_le<double>(out, p[k]);
    if (n) for (int k = 0; k < 3; ++k) append_le<double>(out, (*n)[k]);
    if (c) for (int k = 0; k < 3; ++k) append_le<std::uint8_t>(out, color_byte((*c)[k]));
  } else {
    out += fmt17(p.x()) + " " + fmt17(p.y()) + " " + fmt17(p.z());
    if (n) out += " " + fmt17(n->x()) + " " + fmt17(n->y()) + " " + fmt17(n->z());
    if (c) {
      for (int k = 0; k < 3; ++k) out += " " + std::to_string(color_byte((*c)[k]));
    }
    out += "\n";
  }
}

inline std::vector<Vec3> read_vec3(const PlyData& data, std::size_t ei, const char* a,
                                   const char* b, const char* c, double scale = 1.0) {
  const auto& e = data.elements[ei];
  const int ia = property_index(e, a), ib = property_index(e, b), ic = property_index(e, c);
  std::vector<Vec3> out;
  if (ia < 0 || ib < 0 || ic < 0) return out;
  out.reserve(e.count);
  for (const auto& row : data.rows[ei]) {
    out.emplace_back(row[ia] * scale, row[ib] * scale, row[ic] * scale);
  }
  return out;
}

}  // namespace detail

inline void save_point_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                             PlyEncoding enc = PlyEncoding::kBinary) {
  const bool colors = cloud.has_colors();
  const bool normals = cloud.has_normals();
  std::string out = "ply\nformat ";
  out += enc == PlyEncoding::kBinary ? "binary_little_endian" : "ascii";
  out += " 1.0\n" + detail::vertex_header(cloud.size(), colors, normals) + "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    detail::append_vertex(out, enc, cloud.points[i], normals ? &cloud.normals[i] : nullptr,
                          colors ? &cloud.colors[i] : nullptr);
  }
  detail::write_file(path, out);
}

inline PointCloud load_point_cloud(const std::filesystem::path& path) {
  const auto data = detail::read_ply_data(path);
  std::size_t ei = 0;
  if (!data.find("vertex", &ei)) throw IoError("PLY '" + path.string() + "' has no vertices");
  PointCloud cloud;
  cloud.points = detail::read_vec3(data, ei, "x", "y", "z");
  cloud.normals = detail::read_vec3(data, ei, "nx", "ny", "nz");
  cloud.colors = detail::read_vec3(data, ei, "red", "green", "blue", 1.0 / 255.0);
  return cloud;
}

inline void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh,
                      PlyEncoding enc = PlyEncoding::kBinary) {
  const bool normals = mesh.normals.size() == mesh.vertices.size() && !mesh.vertices.empty();
  std::string out = "ply\nformat ";
  out += enc == PlyEncoding::kBinary ? "binary_little_endian" : "ascii";
  out += " 1.0\n" + detail::vertex_header(mesh.vertices.size(), false, normals) +
         "element face " + std::to_string(mesh.faces.size()) +
         "\nproperty list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    detail::append_vertex(out, enc, mesh.vertices[i], normals ? &mesh.normals[i] : nullptr,
                          nullptr);
  }
  for (const auto& f : mesh.faces) {
    if (enc == PlyEncoding::kBinary) {
      detail::append_le<std::uint8_t>(out, 3);
      for (int v : f) detail::append_le<std::int32_t>(out, v);
    } else {
      out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " +
             std::to_string(f[2]) + "\n";
    }
  }
  detail::write_file(path, out);
}

inline TriangleMesh load_mesh(const std::filesystem::path& path) {
  const auto data = detail::read_ply_data(path);
  std::size_t vi = 0, fi = 0;
  if (!data.find("vertex", &vi)) throw IoError("PLY '" + path.string() + "' has no vertices");
  TriangleMesh mesh;
  mesh.vertices = detail::read_vec3(data, vi, "x", "y", "z");
  mesh.normals = detail::read_vec3(data, vi, "nx", "ny", "nz");
  if (data.find("face", &fi)) {
    for (const auto& row : data.rows[fi]) {
      if (row.empty()) continue;
      const auto n = static_cast<std::size_t>(row[0]);
      // Fan-triangulate polygons.
      for (std::size_t k = 2; k < n; ++k) {
        std::array<int, 3> f{static_cast<int>(row[1]), static_cast<int>(row[k]),
                             static_cast<int>(row[k + 1])};
        for (int v : f) {
          if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertices.size()) {
            throw IoError("PLY '" + path.string() + "' has an out-of-range face index");
          }
        }
        mesh.faces.push_back(f);
      }
    }
  }
  return mesh;
}

}  // namespace gbr::io
