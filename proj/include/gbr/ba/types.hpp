#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gbr/core/camera.hpp"
#include "gbr/core/rig.hpp"

namespace gbr {

struct Observation {
  int view = 0;
  Vec2 pixel = Vec2::Zero();
  double confidence = 1.0;
  int cell = -1;  // raster index in the view, -1 when not from a point map
  bool visible = true;
};

struct Track {
  Vec3 point = Vec3::Zero();
  Vec3 initial_point = Vec3::Zero();  // point before any optimization
  Vec3 color = Vec3::Constant(0.5);
  std::vector<Observation> observations;

  int visible_views() const {
    int n = 0;
    for (const auto& o : observations) n += o.visible;
    return n;
  }
};

struct MatchSet {
  std::vector<Track> tracks;
  std::size_t candidate_matches = 0;  // reciprocal pairs before filtering
  std::size_t filtered_matches = 0;   // after the confidence filters
  std::size_t retained_matches = 0;   // after the per-view cap

  std::size_t size() const noexcept { return tracks.size(); }
  bool empty() const noexcept { return tracks.empty(); }

  std::vector<Vec3> points() const {
    std::vector<Vec3> out;
    out.reserve(tracks.size());
    for (const auto& t : tracks) out.push_back(t.point);
    return out;
  }

  std::size_t observation_count() const {
    std::size_t n = 0;
    for (const auto& t : tracks) n += t.observations.size();
    return n;
  }

  /// Each track is seen in >= 2 views and observed pixels lie inside the images.
  void validate(const CameraRig& rig) const {
    for (const auto& t : tracks) {
      if (t.visible_views() < 2) throw std::invalid_argument("MatchSet: track seen in < 2 views");
      for (const auto& o : t.observations) {
        if (o.view < 0 || static_cast<std::size_t>(o.view) >= rig.size()) {
          throw std::invalid_argument("MatchSet: observation view out of range");
        }
        if (!rig.intrinsics[o.view].contains(o.pixel)) {
          throw std::invalid_argument("MatchSet: observation outside the image");
        }
      }
    }
  }
};

struct PoseDelta {
  double rotation_deg = 0.0;
  double translation = 0.0;
};

struct BAReport {
  double initial_rmse = 0.0;
  double final_rmse = 0.0;
  double initial_cost = 0.0;  // robust objective
  double final_cost = 0.0;
  int iterations = 0;  // accepted steps
  int evaluations = 0;
  bool stalled = false;
  std::string termination;
  std::vector<PoseDelta> pose_deltas;
  std::size_t observations = 0;
  std::size_t tracks = 0;
  std::size_t retained_matches = 0;
  std::size_t total_matches = 0;
};

}  // namespace gbr
