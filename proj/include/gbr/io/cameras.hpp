#pragma once

// cameras.txt: comment lines start with '#'; one line per view with
//   view width height fx fy cx cy  r00 r01 r02 t0  r10 r11 r12 t1  r20 r21 r22 t2
// where [R | t] is the world->camera pose.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "gbr/core/error.hpp"
#include "gbr/core/rig.hpp"

namespace gbr::io {

inline void save_cameras(const std::filesystem::path& path, const CameraRig& rig) {
  rig.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "# view width height fx fy cx cy r00 r01 r02 t0 r10 r11 r12 t1 r20 r21 r22 t2\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), " %.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const auto& k = rig.intrinsics[i];
    const auto& p = rig.poses[i];
    out << i << ' ' << k.width << ' ' << k.height;
    num(k.fx);
    num(k.fy);
    num(k.cx);
    num(k.cy);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) num(p.rotation()(r, c));
      num(p.translation()[r]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline CameraRig load_cameras(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cameras file '" + path.string() + "'");
  std::map<int, std::pair<CameraIntrinsics, CameraPose>> views;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int view = 0, w = 0, h = 0;
    double v[4 + 12];
    if (!(ls >> view >> w >> h)) {
      throw IoError("'" + path.string() + "' line " + std::to_string(line_no) + ": malformed");
    }
    for (double& x : v) {
      if (!(ls >> x)) {
        throw IoError("'" + path.string() + "' line " + std::to_string(line_no) +
                      ": expected 19 fields");
      }
      if (!std::isfinite(x)) {
        throw IoError("'" + path.string() + "' line " + std::to_string(line_no) +
                      ": non-finite camera value");
      }
    }
    Mat3 r;
    Vec3 t;
    for (int row = 0; row < 3; ++row) {
      for (int c = 0; c < 3; ++c) r(row, c) = v[4 + 4 * row + c];
      t[row] = v[4 + 4 * row + 3];
    }
    try {
      views[view] = {CameraIntrinsics(v[0], v[1], v[2], v[3], w, h), CameraPose(r, t)};
    } catch (const std::invalid_argument& e) {
      throw IoError("'" + path.string() + "' line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  CameraRig rig;
  int expected = 0;
  for (const auto& [id, cam] : views) {
    if (id != expected++) {
      throw IoError("'" + path.string() + "': view ids must be contiguous from 0");
    }
    rig.intrinsics.push_back(cam.first);
    rig.poses.push_back(cam.second);
  }
  return rig;
}

}  // namespace gbr::io
