// Reconstructs a synthetic sphere in memory: pose recovery, splat rendering,
// TSDF fusion and evaluation against the known surface.

#include <cstdio>

#include "gbr/gbr.hpp"

int main() {
  using namespace gbr;
  try {
    SyntheticSceneSpec spec;
    spec.views = 12;
    const auto scene = generate_synthetic(spec);

    const auto ba = neural_bundle_adjust(scene.bundle);
    std::printf("bundle adjustment: %zu tracks, reprojection rmse %.3g px, %zu cloud points\n", ba.tracks.size(),
                ba.report.final_rmse, ba.cloud.size());

    auto splats = scene_from_cloud(ba.cloud);
    Vec3 lo = ba.cloud.points.front(), hi = lo;
    for (const auto& p : ba.cloud.points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double pad = 0.05 * (hi - lo).norm();
    lo.array() -= pad;
    hi.array() += pad;
    const double voxel = default_voxel_size(lo, hi);
    auto volume = TsdfVolume::from_bounds(lo, hi, voxel, 5.0 * voxel);
    for (std::size_t v = 0; v < ba.rig.size(); ++v) {
      const auto out = render(splats, ba.rig.intrinsics[v], ba.rig.poses[v]);
      volume.integrate(out.depth, ba.rig.intrinsics[v], ba.rig.poses[v]);
    }
    auto mesh = volume.extract_mesh();
    std::printf("fused mesh: %zu vertices, %zu faces at voxel %.4g\n", mesh.vertices.size(), mesh.faces.size(), voxel);

    const auto sim = umeyama(ba.rig.centers(), scene.truth.rig.centers());
    for (auto& p : mesh.vertices) p = sim(p);
    const auto pred = sample_mesh(mesh, 20000, 0);
    const auto gt = sample_mesh(scene.truth.mesh, 20000, 0);
    const auto report = evaluate_geometry(pred, gt, 0.0);
    std::printf("chamfer %.4g (%.2f voxels), F1 %.3f, camera ATE %.3g\n", *report.chamfer,
                *report.chamfer / (voxel * sim.scale()), report.f1->f1, ate(ba.rig.poses, scene.truth.rig.poses));
  } catch (const Error& e) {
    std::fprintf(stderr, "quickstart: %s\n", e.what());
    return exit_code(e.kind());
  }
  return 0;
}
