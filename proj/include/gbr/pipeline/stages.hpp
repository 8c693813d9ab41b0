#pragma once

// Output layout under the run directory:
//   scene/          synthetic scene (+ gt/) written by `synth`
//   align/          cameras.txt, align_report.json
//   match/          tracks.txt, match_report.json
//   ba/             cameras.txt, cloud.ply, ba_report.json
//   depth/          initial_###.raw, depth_###.raw, normal_###.raw, refine_report.json
//   render/         color_###.png, depth_###.raw, normal_###.raw, render_report.json
//   losses/         losses.json
//   fuse/           mesh.ply, volume_meta.json
//   eval/           eval_report.json

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gbr/ba/neural_ba.hpp"
#include "gbr/depth/refine.hpp"
#include "gbr/eval/metrics.hpp"
#include "gbr/io/cameras.hpp"
#include "gbr/io/ply.hpp"
#include "gbr/io/png.hpp"
#include "gbr/io/raw.hpp"
#include "gbr/io/scene.hpp"
#include "gbr/io/synthetic.hpp"
#include "gbr/loss/losses.hpp"
#include "gbr/loss/pseudo_view.hpp"
#include "gbr/mesh/tsdf.hpp"
#include "gbr/pipeline/config.hpp"
#include "gbr/pipeline/manifest.hpp"
#include "gbr/render/splat.hpp"

namespace gbr {

struct Workspace {
  std::filesystem::path scene;
  std::filesystem::path out;
  std::filesystem::path gt;  // empty selects <scene>/gt

  std::filesystem::path gt_dir() const { return gt.empty() ? scene / "gt" : gt; }
};

inline std::string stage_dir_name(const std::string& stage) {
  if (stage == "synth") return "scene";
  if (stage == "refine-depth") return "depth";
  return stage;
}

/// What a stage sees: the finished outputs of earlier stages under `ws.out`
/// and a fresh directory for its own outputs.
struct StageContext {
  const PipelineConfig& cfg;
  Workspace ws;
  std::filesystem::path dir;
  EventLog& log;

  std::filesystem::path input(const std::string& stage, const std::string& file) const {
    const auto p = ws.out / stage_dir_name(stage) / file;
    if (!std::filesystem::exists(p)) {
      throw IoError("missing '" + p.string() + "' (run the " + stage + " stage first)");
    }
    return p;
  }
};

namespace detail {

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

struct GroundTruthFiles {
  CameraRig rig;
  std::vector<DepthMap> depths;
  TriangleMesh mesh;
};

inline std::optional<GroundTruthFiles> load_ground_truth(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir / "cameras.txt")) return std::nullopt;
  GroundTruthFiles gt;
  gt.rig = io::load_cameras(dir / "cameras.txt");
  for (std::size_t v = 0; v < gt.rig.size(); ++v) {
    const auto p = dir / io::indexed_name("depth", static_cast<int>(v), ".raw");
    if (!fs::exists(p)) break;
    gt.depths.push_back(io::load_depth(p));
  }
  if (gt.depths.size() != gt.rig.size()) gt.depths.clear();
  if (fs::exists(dir / "mesh.ply")) gt.mesh = io::load_mesh(dir / "mesh.ply");
  return gt;
}

/// Similarity taking the estimated camera centers onto the ground-truth ones.
inline SimilarityTransform align_to_truth(const CameraRig& est, const CameraRig& gt) {
  if (est.size() != gt.size()) {
    throw IoError("ground truth has " + std::to_string(gt.size()) + " cameras, estimate " + std::to_string(est.size()));
  }
  return umeyama(est.centers(), gt.centers(), {}, true);
}

inline std::vector<DepthMap> load_indexed_depths(const StageContext& ctx, const std::string& stage, const char* stem,
                                                 std::size_t n) {
  std::vector<DepthMap> out;
  for (std::size_t v = 0; v < n; ++v) {
    out.push_back(io::load_depth(ctx.input(stage, io::indexed_name(stem, static_cast<int>(v), ".raw"))));
  }
  return out;
}

inline std::vector<NormalMap> load_indexed_normals(const StageContext& ctx, const std::string& stage, const char* stem,
                                                   std::size_t n) {
  std::vector<NormalMap> out;
  for (std::size_t v = 0; v < n; ++v) {
    out.push_back(io::load_normals(ctx.input(stage, io::indexed_name(stem, static_cast<int>(v), ".raw"))));
  }
  return out;
}

inline Mask sky_mask(const SceneBundle& scene, std::size_t v) {
  return scene.views[v].sky ? *scene.views[v].sky : Mask();
}

inline nlohmann::json ba_report_json(const BAReport& r) {
  auto deltas = nlohmann::json::array();
  for (const auto& d : r.pose_deltas) deltas.push_back({{"rotation_deg", d.rotation_deg}, {"translation", d.translation}});
  return {{"initial_rmse_px", r.initial_rmse}, {"final_rmse_px", r.final_rmse}, {"initial_cost", r.initial_cost},
          {"final_cost", r.final_cost},        {"iterations", r.iterations},    {"evaluations", r.evaluations},
          {"stalled", r.stalled},              {"termination", r.termination},  {"observations", r.observations},
          {"tracks", r.tracks},                {"pose_deltas", deltas}};
}

inline CameraRig focal_rig(const SceneBundle& scene, const std::vector<PointMapFrame>& own, const FocalOptions& opt,
                           nlohmann::json& report) {
  if (scene.cameras) return *scene.cameras;
  CameraRig rig;
  report["focals"] = nlohmann::json::array();
  for (const auto& f : own) {
    const auto est = estimate_focal(f, opt);
    report["focals"].push_back({{"focal", est.focal}, {"ambiguous", est.ambiguous}});
    CameraIntrinsics k;
    k.width = f.width();
    k.height = f.height();
    k.fx = k.fy = est.focal;
    k.cx = 0.5 * k.width;
    k.cy = 0.5 * k.height;
    rig.intrinsics.push_back(k);
  }
  return rig;
}

}  // namespace detail

inline void stage_synth(StageContext& ctx) {
  SyntheticSceneSpec spec = ctx.cfg.synth.spec;
  spec.surface = detail::preset_surface(ctx.cfg.synth.preset);
  spec.seed = ctx.cfg.seed;
  const auto scene = generate_synthetic(spec);
  io::save_synthetic(ctx.dir, scene);
  ctx.log.emit("info", "synth", {{"preset", ctx.cfg.synth.preset}, {"views", spec.views}});
}

inline void stage_align(StageContext& ctx) {
  const auto scene = io::load_scene(ctx.ws.scene);
  std::vector<PointMapFrame> own;
  for (const auto& v : scene.views) own.push_back(v.pointmap);
  nlohmann::json report;
  CameraRig rig = detail::focal_rig(scene, own, ctx.cfg.ba.focal, report);
  const auto res = pairwise_align(scene, ctx.cfg.ba.align);
  rig.poses.clear();
  auto scales = nlohmann::json::array();
  for (std::size_t v = 0; v < scene.size(); ++v) {
    rig.poses.push_back(res.pose(static_cast<int>(v)));
    scales.push_back(res.transforms[v].scale());
  }
  io::save_cameras(ctx.dir / "cameras.txt", rig);
  report["initial_energy"] = res.initial_energy;
  report["final_energy"] = res.final_energy;
  report["iterations"] = res.iterations;
  report["scales"] = scales;
  report["warnings"] = res.warnings;
  detail::write_json(ctx.dir / "align_report.json", report);
}

inline void stage_match(StageContext& ctx) {
  const auto scene = io::load_scene(ctx.ws.scene);
  std::vector<PointMapFrame> own;
  std::vector<Raster<double>> secondary;
  std::vector<RgbImage> images;
  for (const auto& v : scene.views) {
    own.push_back(v.pointmap);
    secondary.push_back(v.match_confidence);
    images.push_back(v.image);
  }
  const auto align = pairwise_align(scene, ctx.cfg.ba.align);
  const auto unified = unify_frames(own, align.transforms);
  const auto matches = extract_matches(unified, secondary, scene.pairs, ctx.cfg.ba.matching, &images);
  std::ofstream tracks(ctx.dir / "tracks.txt");
  tracks.precision(17);
  tracks << "# x y z then view u v per observation\n";
  for (const auto& t : matches.tracks) {
    tracks << t.point.x() << ' ' << t.point.y() << ' ' << t.point.z();
    for (const auto& o : t.observations) tracks << ' ' << o.view << ' ' << o.pixel.x() << ' ' << o.pixel.y();
    tracks << '\n';
  }
  if (!tracks) throw IoError("cannot write '" + (ctx.dir / "tracks.txt").string() + "'");
  detail::write_json(ctx.dir / "match_report.json", {{"candidate_matches", matches.candidate_matches},
                                                     {"filtered_matches", matches.filtered_matches},
                                                     {"retained_matches", matches.retained_matches},
                                                     {"tracks", matches.size()}});
}

inline void stage_ba(StageContext& ctx) {
  const auto scene = io::load_scene(ctx.ws.scene);
  const auto res = neural_bundle_adjust(scene, ctx.cfg.ba);
  if (!std::isfinite(res.report.final_rmse)) throw NumericalError("ba: non-finite reprojection error");
  io::save_cameras(ctx.dir / "cameras.txt", res.rig);
  io::save_point_cloud(ctx.dir / "cloud.ply", res.cloud);
  nlohmann::json report = detail::ba_report_json(res.report);
  report["second_round"] = {{"tracks", res.second_round.size()}, {"final_rmse_px", res.second_report.final_rmse}};
  report["local_refinement"] = {{"selected", res.local.selected},
                                {"clusters", res.local.clusters},
                                {"patch_tracks", res.local.patches.size()},
                                {"note", res.local.note}};
  report["alignment"] = {{"initial_energy", res.alignment.initial_energy},
                         {"final_energy", res.alignment.final_energy},
                         {"iterations", res.alignment.iterations}};
  report["cloud_points"] = res.cloud.size();
  report["notes"] = res.notes;
  if (const auto gt = detail::load_ground_truth(ctx.ws.gt_dir())) report["ate"] = ate(res.rig.poses, gt->rig.poses);
  detail::write_json(ctx.dir / "ba_report.json", report);
  ctx.log.emit("info", "ba", {{"final_rmse_px", res.report.final_rmse}, {"tracks", res.tracks.size()}});
}

inline void stage_refine_depth(StageContext& ctx) {
  const auto rig = io::load_cameras(ctx.input("ba", "cameras.txt"));
  const auto cloud = io::load_point_cloud(ctx.input("ba", "cloud.ply"));
  const auto& rc = ctx.cfg.refine;
  RefinedDepthProvider provider;
  provider.samples_per_view = rc.samples;
  provider.oracle = rc.oracle;
  provider.oracle.seed = ctx.cfg.seed;
  const auto gt = detail::load_ground_truth(ctx.ws.gt_dir());
  double gt_scale = 1.0;
  if (gt) gt_scale = detail::align_to_truth(rig, gt->rig).scale();
  if (!rc.directory.empty()) {
    provider.source = RefinedDepthProvider::Source::kDirectory;
    provider.directory = rc.directory;
  } else if (rc.gt_targets && gt && !gt->depths.empty()) {
    for (auto d : gt->depths) {
      for (std::size_t i = 0; i < d.depth.size(); ++i) d.depth[i] /= gt_scale;
      provider.targets.push_back(std::move(d));
    }
  }
  nlohmann::json views = nlohmann::json::array();
  for (std::size_t v = 0; v < rig.size(); ++v) {
    const int vi = static_cast<int>(v);
    const auto res = refine_view(vi, cloud.points, rig.intrinsics[v], rig.poses[v], provider, rc.refine);
    io::save_depth(ctx.dir / io::indexed_name("initial", vi, ".raw"), res.initial);
    io::save_depth(ctx.dir / io::indexed_name("depth", vi, ".raw"), res.depth);
    io::save_normals(ctx.dir / io::indexed_name("normal", vi, ".raw"), res.normals);
    nlohmann::json entry{{"view", vi},
                         {"initial_valid", res.initial.valid_count()},
                         {"refined_valid", res.depth.valid_count()},
                         {"fell_back", res.aggregation.fell_back},
                         {"deviation", res.aggregation.deviation},
                         {"warnings", res.warnings}};
    if (gt && !gt->depths.empty()) {
      auto rmse = [&](const DepthMap& d) {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < d.depth.size(); ++i) {
          if (!d.valid[i] || !gt->depths[v].valid[i]) continue;
          const double e = d.depth[i] * gt_scale - gt->depths[v].depth[i];
          s += e * e;
          ++n;
        }
        return n ? std::sqrt(s / static_cast<double>(n)) : 0.0;
      };
      entry["initial_rmse_gt"] = rmse(res.initial);
      entry["refined_rmse_gt"] = rmse(res.depth);
    }
    for (const auto& w : res.warnings) ctx.log.emit("warning", "refine-depth", {{"view", vi}, {"message", w}});
    views.push_back(std::move(entry));
  }
  detail::write_json(ctx.dir / "refine_report.json", {{"views", views}});
}

/// Mean color of the sky-masked pixels, or nullopt without sky masks.
inline std::optional<Vec3> sky_color(const SceneBundle& scene) {
  Vec3 s = Vec3::Zero();
  std::size_t n = 0;
  for (const auto& v : scene.views) {
    if (!v.sky) continue;
    for (std::size_t i = 0; i < v.image.size(); ++i) {
      if ((*v.sky)[i]) {
        s += v.image[i];
        ++n;
      }
    }
  }
  if (!n) return std::nullopt;
  return Vec3(s / static_cast<double>(n));
}

inline SplatScene pipeline_splats(const StageContext& ctx) {
  auto scene = scene_from_cloud(io::load_point_cloud(ctx.input("ba", "cloud.ply")), ctx.cfg.splat_init);
  scene.background = ctx.cfg.background;
  if (ctx.cfg.background_from_sky && std::filesystem::is_directory(ctx.ws.scene)) {
    if (const auto c = sky_color(io::load_scene(ctx.ws.scene))) scene.background = *c;
  }
  return scene;
}

inline void stage_render(StageContext& ctx) {
  const auto rig = io::load_cameras(ctx.input("ba", "cameras.txt"));
  const auto splats = pipeline_splats(ctx);
  nlohmann::json views = nlohmann::json::array();
  for (std::size_t v = 0; v < rig.size(); ++v) {
    const int vi = static_cast<int>(v);
    const auto out = render(splats, rig.intrinsics[v], rig.poses[v], ctx.cfg.render);
    io::write_png_rgb(ctx.dir / io::indexed_name("color", vi, ".png"), out.color);
    io::save_depth(ctx.dir / io::indexed_name("depth", vi, ".raw"), out.depth);
    io::save_normals(ctx.dir / io::indexed_name("normal", vi, ".raw"), out.normal);
    views.push_back({{"view", vi}, {"valid_depth", out.depth.valid_count()}});
  }
  detail::write_json(ctx.dir / "render_report.json", {{"primitives", splats.primitives.size()}, {"views", views}});
}

inline void stage_losses(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto scene = io::load_scene(ctx.ws.scene);
  const auto rig = io::load_cameras(ctx.input("ba", "cameras.txt"));
  const std::size_t n = rig.size();
  const auto rendered = detail::load_indexed_depths(ctx, "render", "depth", n);
  const auto rnormals = detail::load_indexed_normals(ctx, "render", "normal", n);
  const auto refined = detail::load_indexed_depths(ctx, "refine-depth", "depth", n);
  const auto initial = detail::load_indexed_depths(ctx, "refine-depth", "initial", n);
  const auto prior = detail::load_indexed_normals(ctx, "refine-depth", "normal", n);
  std::vector<RgbImage> colors;
  for (std::size_t v = 0; v < n; ++v) {
    colors.push_back(io::read_png_rgb(ctx.input("render", io::indexed_name("color", static_cast<int>(v), ".png"))));
  }

  nlohmann::json warnings = nlohmann::json::array();
  auto cycle = [&](const DepthMap& da, const CameraIntrinsics& ka, const CameraPose& pa, std::size_t b,
                   const std::string& tag) {
    try {
      return cycle_loss(da, ka, pa, rendered[b], rig.intrinsics[b], rig.poses[b], cfg.cycle).loss;
    } catch (const EmptyResultError& e) {
      warnings.push_back(tag + ": " + e.what());
      return 0.0;
    }
  };

  nlohmann::json views = nlohmann::json::array();
  double sum = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const auto& k = rig.intrinsics[v];
    LossComponents c;
    c.normal = normal_loss(rnormals[v], prior[v], cfg.supervision);
    c.depth = depth_loss(refined[v], initial[v], rendered[v], detail::sky_mask(scene, v), cfg.supervision);
    c.ndc = ndc_loss(rendered[v], rnormals[v], k);
    c.cycle = cycle(rendered[v], k, rig.poses[v], (v + 1) % n, "view " + std::to_string(v));
    c.photometric = photometric_loss(colors[v], scene.views[v].image, cfg.supervision.lambda_pho);
    const auto b = total_loss(c, cfg.supervision, false);
    sum += b.total;
    auto j = b.to_json();
    j["view"] = v;
    views.push_back(std::move(j));
  }

  nlohmann::json pseudo = nlohmann::json::array();
  double pseudo_sum = 0.0;
  if (cfg.supervision.pseudo_view_count > 0) {
    const auto cloud = io::load_point_cloud(ctx.input("ba", "cloud.ply"));
    const auto splats = pipeline_splats(ctx);
    const auto set = synthesize_pseudo_views(rig, refined, cloud.points, splats, cfg.supervision, cfg.render);
    for (const auto& w : set.warnings) warnings.push_back(w);
    for (const auto& pv : set.views) {
      const auto r = render(splats, pv.intrinsics, pv.pose, cfg.render);
      LossComponents c;
      c.normal = normal_loss(r.normal, pv.normals, cfg.supervision);
      c.depth = depth_loss(pv.depth, pv.depth, r.depth, {}, cfg.supervision);
      c.ndc = ndc_loss(r.depth, r.normal, pv.intrinsics);
      c.cycle = cycle(r.depth, pv.intrinsics, pv.pose, static_cast<std::size_t>(pv.left),
                      "pseudo view " + std::to_string(pv.left) + "-" + std::to_string(pv.right));
      c.photometric = photometric_loss(r.color, pv.rgb, cfg.supervision.lambda_pho);
      const auto b = total_loss(c, cfg.supervision, true);
      pseudo_sum += b.total;
      auto j = b.to_json();
      j["left"] = pv.left;
      j["right"] = pv.right;
      j["t"] = pv.t;
      pseudo.push_back(std::move(j));
    }
  }
  for (const auto& w : warnings) ctx.log.emit("warning", "losses", {{"message", w}});
  detail::write_json(ctx.dir / "losses.json",
                     {{"views", views},
                      {"pseudo_views", pseudo},
                      {"mean_total", sum / static_cast<double>(n)},
                      {"pseudo_mean_total", pseudo.empty() ? 0.0 : pseudo_sum / static_cast<double>(pseudo.size())},
                      {"warnings", warnings}});
}

inline void stage_fuse(StageContext& ctx) {
  const auto& fc = ctx.cfg.fuse;
  const auto scene = io::load_scene(ctx.ws.scene);
  const auto rig = io::load_cameras(ctx.input("ba", "cameras.txt"));
  const auto cloud = io::load_point_cloud(ctx.input("ba", "cloud.ply"));
  if (cloud.empty()) throw EmptyResultError("fuse: empty point cloud");
  const auto depths = fc.source == "refined" ? detail::load_indexed_depths(ctx, "refine-depth", "depth", rig.size())
                                             : detail::load_indexed_depths(ctx, "render", "depth", rig.size());
  Vec3 lo = cloud.points.front(), hi = lo;
  for (const auto& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double pad = fc.padding * (hi - lo).norm();
  lo.array() -= pad;
  hi.array() += pad;
  const double voxel = fc.voxel > 0.0 ? fc.voxel : default_voxel_size(lo, hi);
  if (!(voxel > 0.0)) throw NumericalError("fuse: degenerate cloud extent");
  auto volume = TsdfVolume::from_bounds(lo, hi, voxel, fc.truncation_voxels * voxel);
  for (std::size_t v = 0; v < rig.size(); ++v) {
    volume.integrate(depths[v], rig.intrinsics[v], rig.poses[v], detail::sky_mask(scene, v));
  }
  const auto mesh = volume.extract_mesh();
  if (mesh.empty()) throw EmptyResultError("fuse: the fused volume has no zero crossing");
  io::save_mesh(ctx.dir / "mesh.ply", mesh);
  auto meta = volume.meta_json();
  meta["source"] = fc.source;
  meta["views"] = rig.size();
  meta["vertices"] = mesh.vertices.size();
  meta["faces"] = mesh.faces.size();
  detail::write_json(ctx.dir / "volume_meta.json", meta);
  ctx.log.emit("info", "fuse", {{"voxel", voxel}, {"faces", mesh.faces.size()}});
}

/// Inputs of the eval stage; empty paths select the run directory outputs.
struct EvalInputs {
  std::filesystem::path mesh;
  std::filesystem::path cameras;
};

inline nlohmann::json evaluate_outputs(StageContext& ctx, const EvalInputs& in = {}) {
  namespace fs = std::filesystem;
  const auto& ec = ctx.cfg.eval;
  const auto gt = detail::load_ground_truth(ctx.ws.gt_dir());
  if (!gt) throw IoError("eval: no ground truth at '" + ctx.ws.gt_dir().string() + "' (expected cameras.txt)");
  const auto cam_path = in.cameras.empty() ? ctx.input("ba", "cameras.txt") : in.cameras;
  const auto mesh_path = in.mesh.empty() ? ctx.input("fuse", "mesh.ply") : in.mesh;
  const auto rig = io::load_cameras(cam_path);
  EvalReport report;
  report.ate_rmse = ate(rig.poses, gt->rig.poses);
  const auto sim = detail::align_to_truth(rig, gt->rig);

  auto mesh = io::load_mesh(mesh_path);
  if (gt->mesh.empty()) throw IoError("eval: ground-truth mesh missing");
  for (auto& p : mesh.vertices) p = sim(p);
  const auto pred_all = sample_mesh(mesh, ec.samples, ctx.cfg.seed);
  const auto gt_all = sample_mesh(gt->mesh, ec.samples, ctx.cfg.seed);
  std::vector<Vec3> pred = pred_all, truth = gt_all;
  if (ec.visibility && !gt->depths.empty()) {
    const auto keep = visible_mask(gt_all, gt->rig, gt->depths, ec.min_views, ec.visibility_tolerance);
    truth.clear();
    for (std::size_t i = 0; i < gt_all.size(); ++i) {
      if (keep[i]) truth.push_back(gt_all[i]);
    }
    pred = region_subset(pred_all, gt_all, keep);
  }
  if (truth.empty() || pred.empty()) throw EmptyResultError("eval: no visible surface samples");
  const auto geo = evaluate_geometry(pred, truth, ec.tau);
  report.chamfer = geo.chamfer;
  report.f1 = geo.f1;
  report.f1_threshold = geo.f1_threshold;

  nlohmann::json j = report.to_json();
  j["sim3_scale"] = sim.scale();
  j["pred_samples"] = pred.size();
  j["gt_samples"] = truth.size();
  const auto meta_path = ctx.ws.out / "fuse" / "volume_meta.json";
  if (in.mesh.empty() && fs::exists(meta_path)) {
    const double voxel = nlohmann::json::parse(read_file(meta_path)).at("voxel_size").get<double>() * sim.scale();
    j["voxel_size_gt"] = voxel;
    j["chamfer_voxels"] = *report.chamfer / voxel;
  }

  const auto render_dir = ctx.ws.out / "render";
  if (fs::exists(render_dir / io::indexed_name("color", 0, ".png")) && fs::exists(ctx.ws.scene)) {
    const auto scene = io::load_scene(ctx.ws.scene);
    double p = 0.0, s = 0.0;
    std::size_t finite = 0;
    for (std::size_t v = 0; v < scene.size(); ++v) {
      const auto img = io::read_png_rgb(render_dir / io::indexed_name("color", static_cast<int>(v), ".png"));
      const double pv = psnr(img, scene.views[v].image);
      if (!std::isinf(pv)) {
        p += pv;
        ++finite;
      }
      s += ssim(img, scene.views[v].image);
    }
    if (finite) {
      j["psnr"] = p / static_cast<double>(finite);
    } else {
      j["psnr"] = "exact";
    }
    j["ssim"] = s / static_cast<double>(scene.size());
  }
  return j;
}

inline void stage_eval(StageContext& ctx) {
  const auto j = evaluate_outputs(ctx);
  detail::write_json(ctx.dir / "eval_report.json", j);
  ctx.log.emit("info", "eval", {{"chamfer", j.value("chamfer", 0.0)}, {"ate", j.value("ate_rmse", 0.0)}});
}

inline void run_stage_body(const std::string& name, StageContext& ctx) {
  if (name == "synth") return stage_synth(ctx);
  if (name == "align") return stage_align(ctx);
  if (name == "match") return stage_match(ctx);
  if (name == "ba") return stage_ba(ctx);
  if (name == "refine-depth") return stage_refine_depth(ctx);
  if (name == "render") return stage_render(ctx);
  if (name == "losses") return stage_losses(ctx);
  if (name == "fuse") return stage_fuse(ctx);
  if (name == "eval") return stage_eval(ctx);
  throw ConfigError("unknown stage '" + name + "'");
}

}  // namespace gbr
