#pragma once

// Scene directory layout:
//   view_###/image.png        RGB image
//   view_###/pointmap.raw     3-channel points in the view's own camera frame
//   view_###/conf.raw         1-channel confidence
//   view_###/sky.png          optional, nonzero = sky
//   view_###/matchconf.raw    optional secondary match confidence
//   pair_KKK_LLL/pointmap.raw view L's points predicted in view K's frame
//   pair_KKK_LLL/conf.raw     confidence of that prediction
//   pairs.txt                 one "i j" pair per line
//   cameras.txt               optional initial cameras

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gbr/core/error.hpp"
#include "gbr/core/maps.hpp"
#include "gbr/core/rig.hpp"
#include "gbr/io/cameras.hpp"
#include "gbr/io/png.hpp"
#include "gbr/io/raw.hpp"

namespace gbr {

struct SceneView {
  RgbImage image;
  PointMapFrame pointmap;
  std::optional<Mask> sky;
  Raster<double> match_confidence;  // 1.0 where no file was given

  int width() const noexcept { return image.width(); }
  int height() const noexcept { return image.height(); }
  bool is_sky(int x, int y) const { return sky && (*sky)(x, y) != 0; }
};

/// View `second`'s point map predicted in view `first`'s camera frame.
struct PairPrediction {
  int first = 0;
  int second = 0;
  PointMapFrame points;
};

struct SceneBundle {
  std::vector<SceneView> views;
  std::vector<std::pair<int, int>> pairs;
  std::vector<PairPrediction> predictions;
  std::optional<CameraRig> cameras;

  std::size_t size() const noexcept { return views.size(); }

  const PairPrediction* prediction(int first, int second) const {
    for (const auto& p : predictions) {
      if (p.first == first && p.second == second) return &p;
    }
    return nullptr;
  }

  void validate() const {
    const int n = static_cast<int>(views.size());
    for (const auto& v : views) {
      require_same_shape(v.image, v.pointmap.points, "scene view image/pointmap");
      require_same_shape(v.image, v.pointmap.confidence, "scene view image/confidence");
      require_same_shape(v.image, v.match_confidence, "scene view image/matchconf");
      if (v.sky) require_same_shape(v.image, *v.sky, "scene view image/sky");
    }
    for (const auto& [a, b] : pairs) {
      if (a < 0 || b < 0 || a >= n || b >= n || a == b) {
        throw std::invalid_argument("SceneBundle: pair (" + std::to_string(a) + "," +
                                    std::to_string(b) + ") out of range");
      }
    }
    for (const auto& p : predictions) {
      if (p.first < 0 || p.second < 0 || p.first >= n || p.second >= n) {
        throw std::invalid_argument("SceneBundle: pair prediction index out of range");
      }
      require_same_shape(views[p.second].image, p.points.points, "pair prediction");
    }
    if (cameras && cameras->size() != views.size()) {
      throw std::invalid_argument("SceneBundle: camera count differs from view count");
    }
  }
};

/// Complete graph for up to 8 views, otherwise each view linked to its two
/// successors on the ring.
inline std::vector<std::pair<int, int>> default_pairs(int n) {
  std::vector<std::pair<int, int>> out;
  if (n <= 8) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) out.emplace_back(i, j);
    }
    return out;
  }
  std::set<std::pair<int, int>> seen;
  for (int i = 0; i < n; ++i) {
    for (int d = 1; d <= 2; ++d) {
      const int j = (i + d) % n;
      seen.emplace(std::min(i, j), std::max(i, j));
    }
  }
  return {seen.begin(), seen.end()};
}

namespace io {

inline std::string view_dir_name(int v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d", v);
  return buf;
}

inline std::string pair_dir_name(int k, int l) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pair_%03d_%03d", k, l);
  return buf;
}

inline std::string indexed_name(const char* stem, int v, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d%s", stem, v, ext);
  return buf;
}

inline std::vector<std::pair<int, int>> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing pair list '" + path.string() + "'");
  std::vector<std::pair<int, int>> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int a = 0, b = 0;
    if (!(ls >> a >> b)) {
      throw IoError("'" + path.string() + "' line " + std::to_string(line_no) +
                    ": expected two view indices");
    }
    pairs.emplace_back(a, b);
  }
  return pairs;
}

inline void save_pairs(const std::filesystem::path& path,
                       const std::vector<std::pair<int, int>>& pairs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& [a, b] : pairs) out << a << ' ' << b << '\n';
}

namespace detail {

inline PointMapFrame load_pointmap(const std::filesystem::path& dir, int frame, int reference) {
  PointMapFrame f;
  f.points = load_vector_raw(dir / "pointmap.raw");
  f.confidence = load_scalar_raw(dir / "conf.raw");
  if (!f.points.same_shape(f.confidence)) {
    throw IoError("'" + (dir / "conf.raw").string() + "': dimensions differ from pointmap.raw");
  }
  f.frame_id = frame;
  f.reference_frame = reference;
  f.sanitize();
  return f;
}

inline void check_dims(const std::filesystem::path& file, int w, int h, int ew, int eh) {
  if (w != ew || h != eh) {
    throw IoError("'" + file.string() + "': dimension mismatch (" + std::to_string(w) + "x" +
                  std::to_string(h) + ", expected " + std::to_string(ew) + "x" +
                  std::to_string(eh) + ")");
  }
}

}  // namespace detail

inline SceneBundle load_scene(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("scene directory '" + root.string() + "' not found");
  SceneBundle scene;
  for (int v = 0;; ++v) {
    const fs::path dir = root / view_dir_name(v);
    if (!fs::is_directory(dir)) break;
    SceneView view;
    view.image = read_png_rgb(dir / "image.png");
    const int w = view.image.width();
    const int h = view.image.height();
    view.pointmap = detail::load_pointmap(dir, v, v);
    detail::check_dims(dir / "pointmap.raw", view.pointmap.width(), view.pointmap.height(), w, h);
    if (fs::exists(dir / "sky.png")) {
      view.sky = read_png_gray(dir / "sky.png");
      detail::check_dims(dir / "sky.png", view.sky->width(), view.sky->height(), w, h);
    }
    if (fs::exists(dir / "matchconf.raw")) {
      view.match_confidence = load_scalar_raw(dir / "matchconf.raw");
      detail::check_dims(dir / "matchconf.raw", view.match_confidence.width(),
                         view.match_confidence.height(), w, h);
      for (auto& c : view.match_confidence.data()) {
        if (!(c >= 0.0)) c = 0.0;
      }
    } else {
      view.match_confidence = Raster<double>(w, h, 1.0);
    }
    scene.views.push_back(std::move(view));
  }
  if (scene.views.empty()) {
    throw IoError("scene '" + root.string() + "' has no view_000 directory");
  }
  const int n = static_cast<int>(scene.views.size());
  scene.pairs = load_pairs(root / "pairs.txt");
  for (const auto& [a, b] : scene.pairs) {
    if (a < 0 || b < 0 || a >= n || b >= n || a == b) {
      throw IoError("'" + (root / "pairs.txt").string() + "': pair (" + std::to_string(a) + "," +
                    std::to_string(b) + ") out of range for " + std::to_string(n) + " views");
    }
    for (const auto& [k, l] : {std::pair{a, b}, std::pair{b, a}}) {
      const fs::path dir = root / pair_dir_name(k, l);
      if (!fs::is_directory(dir)) continue;
      PairPrediction p{k, l, detail::load_pointmap(dir, l, k)};
      detail::check_dims(dir / "pointmap.raw", p.points.width(), p.points.height(),
                         scene.views[l].width(), scene.views[l].height());
      scene.predictions.push_back(std::move(p));
    }
  }
  if (fs::exists(root / "cameras.txt")) {
    scene.cameras = load_cameras(root / "cameras.txt");
    if (scene.cameras->size() != scene.views.size()) {
      throw IoError("'" + (root / "cameras.txt").string() + "': " +
                    std::to_string(scene.cameras->size()) + " cameras for " + std::to_string(n) +
                    " views");
    }
  }
  return scene;
}

inline void save_scene(const std::filesystem::path& root, const SceneBundle& scene) {
  namespace fs = std::filesystem;
  scene.validate();
  fs::create_directories(root);
  for (std::size_t v = 0; v < scene.views.size(); ++v) {
    const auto& view = scene.views[v];
    const fs::path dir = root / view_dir_name(static_cast<int>(v));
    fs::create_directories(dir);
    write_png_rgb(dir / "image.png", view.image);
    write_raw(dir / "pointmap.raw", to_raw(view.pointmap.points));
    write_raw(dir / "conf.raw", to_raw(view.pointmap.confidence));
    if (view.sky) write_png_gray(dir / "sky.png", *view.sky);
    write_raw(dir / "matchconf.raw", to_raw(view.match_confidence));
  }
  for (const auto& p : scene.predictions) {
    const fs::path dir = root / pair_dir_name(p.first, p.second);
    fs::create_directories(dir);
    write_raw(dir / "pointmap.raw", to_raw(p.points.points));
    write_raw(dir / "conf.raw", to_raw(p.points.confidence));
  }
  save_pairs(root / "pairs.txt", scene.pairs);
  if (scene.cameras) save_cameras(root / "cameras.txt", *scene.cameras);
}

}  // namespace io
}  // namespace gbr
