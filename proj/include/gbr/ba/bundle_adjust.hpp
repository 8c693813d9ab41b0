#pragma once

// Levenberg-Marquardt bundle adjustment with a Schur complement over camera
// parameters. The problem is solved in the frame where view 0 is the
// identity; view 0 stays fixed and view 1 moves on the sphere of its initial
// baseline length, which removes the similarity gauge.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "gbr/ba/types.hpp"
#include "gbr/core/error.hpp"
#include "gbr/core/rig.hpp"

namespace gbr {

enum class BAMode { kFull, kPointsOnly };
enum class FocalMode { kFixed, kShared, kPerView };

struct BAOptions {
  BAMode mode = BAMode::kFull;
  FocalMode focal = FocalMode::kFixed;
  double huber_delta = 2.0;  // px; infinity disables the robust loss
  int max_iterations = 100;
  double relative_tolerance = 1e-10;
  double rmse_tolerance = 1e-10;
  double initial_lambda = 1e-3;
  int max_rejections = 10;
};

namespace detail {

struct BAObs {
  int track = 0;
  int view = 0;
  Vec2 pixel = Vec2::Zero();
};

struct BALayout {
  std::vector<int> rot, cen, cen_dim, foc;
  int dim = 0;
};

struct BAState {
  std::vector<Mat3> rot;
  std::vector<Vec3> cen;
  std::vector<double> fscale;  // multiplies fx and fy
  std::vector<Vec3> pts;
};

inline Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& u) {
  const Vec3 n = u.normalized();
  const Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 b1 = n.cross(a).normalized();
  const Vec3 b2 = n.cross(b1);
  Eigen::Matrix<double, 3, 2> b;
  b.col(0) = b1;
  b.col(1) = b2;
  return b;
}

inline double huber(double e, double delta) {
  return e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
}

}  // namespace detail

/// Refines rig poses (and optionally focals) and track points in place.
inline BAReport bundle_adjust(CameraRig& rig, MatchSet& matches, const BAOptions& opt = {}) {
  rig.validate();
  const int nv = static_cast<int>(rig.size());
  const bool full = opt.mode == BAMode::kFull;
  if (nv < 2) throw NumericalError("bundle_adjust: underdetermined (fewer than 2 views)");
  if (matches.tracks.size() < 6) {
    throw NumericalError("bundle_adjust: underdetermined (fewer than 6 tracks)");
  }

  // Anchored working frame.
  std::vector<Vec3> pts0 = matches.points();
  const CameraPose g = rig.poses.front();
  const CameraRig work = rig.anchored(&pts0);

  detail::BAState st;
  for (int v = 0; v < nv; ++v) {
    st.rot.push_back(work.poses[v].rotation());
    st.cen.push_back(work.poses[v].center());
    st.fscale.push_back(1.0);
  }
  st.pts = pts0;

  std::vector<detail::BAObs> obs;
  std::vector<char> view_used(nv, 0);
  for (std::size_t j = 0; j < matches.tracks.size(); ++j) {
    for (const auto& o : matches.tracks[j].observations) {
      if (!o.visible) continue;
      if (o.view < 0 || o.view >= nv) throw ConfigError("bundle_adjust: observation view out of range");
      const Vec3 p = st.rot[o.view] * (st.pts[j] - st.cen[o.view]);
      if (!(p.z() > kMinCameraDepth)) continue;
      obs.push_back({static_cast<int>(j), o.view, o.pixel});
      view_used[o.view] = 1;
    }
  }
  if (std::count(view_used.begin(), view_used.end(), 1) < 2) {
    throw NumericalError("bundle_adjust: underdetermined (observations span fewer than 2 views)");
  }

  const double baseline = st.cen[1].norm();
  if (full && !(baseline > 0.0)) {
    throw NumericalError("bundle_adjust: views 0 and 1 share a center; baseline gauge undefined");
  }

  detail::BALayout lay;
  lay.rot.assign(nv, -1);
  lay.cen.assign(nv, -1);
  lay.cen_dim.assign(nv, 0);
  lay.foc.assign(nv, -1);
  if (full) {
    for (int v = 1; v < nv; ++v) {
      lay.rot[v] = lay.dim;
      lay.dim += 3;
      lay.cen[v] = lay.dim;
      lay.cen_dim[v] = v == 1 ? 2 : 3;
      lay.dim += lay.cen_dim[v];
    }
    if (opt.focal == FocalMode::kShared) {
      for (int v = 0; v < nv; ++v) lay.foc[v] = lay.dim;
      ++lay.dim;
    } else if (opt.focal == FocalMode::kPerView) {
      for (int v = 0; v < nv; ++v) lay.foc[v] = lay.dim++;
    }
  }
  const int cdim = lay.dim;
  const int nt = static_cast<int>(st.pts.size());
  const double delta = opt.huber_delta > 0.0 ? opt.huber_delta : std::numeric_limits<double>::infinity();

  auto residual = [&](const detail::BAState& s, const detail::BAObs& o, Vec3& pc) -> Vec2 {
    pc = s.rot[o.view] * (s.pts[o.track] - s.cen[o.view]);
    const auto& k = work.intrinsics[o.view];
    const double f = s.fscale[o.view];
    return Vec2(f * k.fx * pc.x() / pc.z() + k.cx, f * k.fy * pc.y() / pc.z() + k.cy) - o.pixel;
  };

  // Returns (robust cost, sum of squared residuals); cost is +inf when any
  // observation falls behind its camera.
  auto evaluate = [&](const detail::BAState& s) {
    double cost = 0.0, sq = 0.0;
    for (const auto& o : obs) {
      Vec3 pc;
      const Vec2 r = residual(s, o, pc);
      if (!(pc.z() > kMinCameraDepth) || !r.allFinite()) {
        return std::pair{std::numeric_limits<double>::infinity(), 0.0};
      }
      const double e2 = r.squaredNorm();
      cost += detail::huber(std::sqrt(e2), delta);
      sq += e2;
    }
    return std::pair{cost, sq};
  };

  const double nobs = static_cast<double>(obs.size());
  BAReport rep;
  rep.observations = obs.size();
  rep.tracks = matches.tracks.size();
  rep.retained_matches = matches.retained_matches;
  rep.total_matches = matches.candidate_matches;
  auto [cost, sq] = evaluate(st);
  ++rep.evaluations;
  rep.initial_rmse = std::sqrt(sq / nobs);
  rep.initial_cost = cost;
  double rmse = rep.initial_rmse;

  // Per-track scratch for the Schur complement.
  std::vector<Mat3> hpp_inv(nt);
  std::vector<Vec3> gp(nt);
  std::vector<std::vector<std::pair<int, Vec3>>> hcp(nt);
  std::vector<int> obs_begin(nt + 1, 0);
  std::vector<int> obs_order(obs.size());
  {
    for (const auto& o : obs) ++obs_begin[o.track + 1];
    for (int j = 0; j < nt; ++j) obs_begin[j + 1] += obs_begin[j];
    std::vector<int> fill(obs_begin.begin(), obs_begin.end() - 1);
    for (std::size_t i = 0; i < obs.size(); ++i) obs_order[fill[obs[i].track]++] = static_cast<int>(i);
  }

  double lambda = opt.initial_lambda;
  int rejections = 0;
  int loops = 0;
  rep.termination = "max_iterations";
  if (rmse < opt.rmse_tolerance) rep.termination = "converged";

  Eigen::MatrixXd hcc(cdim, cdim);
  Eigen::VectorXd gc(cdim);
  std::vector<int> slot(cdim, -1);

  while (rep.termination == "max_iterations" && loops < opt.max_iterations) {
    ++loops;
    hcc.setZero();
    gc.setZero();
    std::vector<Mat3> hpp(nt, Mat3::Zero());
    std::fill(gp.begin(), gp.end(), Vec3::Zero());

    // Linearize.
    for (int j = 0; j < nt; ++j) {
      hcp[j].clear();
      for (int q = obs_begin[j]; q < obs_begin[j + 1]; ++q) {
        const auto& o = obs[obs_order[q]];
        Vec3 pc;
        const Vec2 r = residual(st, o, pc);
        const double e = r.norm();
        const double w = e <= delta ? 1.0 : delta / e;
        const auto& k = work.intrinsics[o.view];
        const double f = st.fscale[o.view];
        const double iz = 1.0 / pc.z();
        Eigen::Matrix<double, 2, 3> dpi;
        dpi << f * k.fx * iz, 0.0, -f * k.fx * pc.x() * iz * iz, 0.0, f * k.fy * iz,
            -f * k.fy * pc.y() * iz * iz;
        const Mat3& rv = st.rot[o.view];
        const Eigen::Matrix<double, 2, 3> jp = dpi * rv;
        hpp[j] += w * jp.transpose() * jp;
        gp[j] += w * jp.transpose() * r;

        // Camera block: up to 3 rotation, 3 center, 1 focal columns.
        int idx[7];
        Eigen::Matrix<double, 2, 7> jc;
        int m = 0;
        if (lay.rot[o.view] >= 0) {
          jc.block<2, 3>(0, m) = -dpi * skew(pc);
          for (int a = 0; a < 3; ++a) idx[m++] = lay.rot[o.view] + a;
          const Eigen::Matrix<double, 2, 3> dc = -dpi * rv;
          if (lay.cen_dim[o.view] == 2) {
            jc.block<2, 2>(0, m) = dc * detail::tangent_basis(st.cen[o.view]);
            for (int a = 0; a < 2; ++a) idx[m++] = lay.cen[o.view] + a;
          } else {
            jc.block<2, 3>(0, m) = dc;
            for (int a = 0; a < 3; ++a) idx[m++] = lay.cen[o.view] + a;
          }
        }
        if (lay.foc[o.view] >= 0) {
          jc.col(m) = Vec2(f * k.fx * pc.x() * iz, f * k.fy * pc.y() * iz);
          idx[m++] = lay.foc[o.view];
        }
        for (int a = 0; a < m; ++a) {
          gc[idx[a]] += w * jc.col(a).dot(r);
          for (int b = 0; b < m; ++b) hcc(idx[a], idx[b]) += w * jc.col(a).dot(jc.col(b));
          const Vec3 row = w * (jc.col(a).transpose() * jp).transpose();
          if (slot[idx[a]] < 0) {
            slot[idx[a]] = static_cast<int>(hcp[j].size());
            hcp[j].emplace_back(idx[a], row);
          } else {
            hcp[j][slot[idx[a]]].second += row;
          }
        }
      }
      for (const auto& [i, _] : hcp[j]) slot[i] = -1;
    }

    // Damped Schur solve.
    bool solved = false;
    Eigen::VectorXd dc(cdim);
    std::vector<Vec3> dp(nt);
    while (!solved) {
      Eigen::MatrixXd s = hcc;
      Eigen::VectorXd b = -gc;
      for (int i = 0; i < cdim; ++i) s(i, i) += lambda * std::max(hcc(i, i), 1e-6);
      bool ok = true;
      for (int j = 0; j < nt; ++j) {
        Mat3 c = hpp[j];
        for (int a = 0; a < 3; ++a) c(a, a) += lambda * std::max(hpp[j](a, a), 1e-6);
        Eigen::LDLT<Mat3> ldlt(c);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
          ok = false;
          break;
        }
        hpp_inv[j] = ldlt.solve(Mat3::Identity());
        const Vec3 cg = hpp_inv[j] * gp[j];
        for (const auto& [ia, ra] : hcp[j]) {
          b[ia] += ra.dot(cg);
          const Vec3 ca = hpp_inv[j] * ra;
          for (const auto& [ib, rb] : hcp[j]) s(ia, ib) -= ca.dot(rb);
        }
      }
      if (ok && cdim > 0) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
          ok = false;
        } else {
          dc = ldlt.solve(b);
          ok = dc.allFinite();
        }
      }
      if (ok) {
        for (int j = 0; j < nt; ++j) {
          Vec3 rhs = -gp[j];
          for (const auto& [i, row] : hcp[j]) rhs -= row * dc[i];
          dp[j] = hpp_inv[j] * rhs;
        }
        solved = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) break;
      }
    }
    if (!solved) {
      rep.termination = "singular";
      break;
    }

    // Trial state.
    double step2 = dc.squaredNorm(), scale2 = 0.0;
    detail::BAState trial = st;
    for (int v = 0; v < nv; ++v) {
      if (lay.rot[v] >= 0) {
        trial.rot[v] = orthonormalize(so3_exp(dc.segment<3>(lay.rot[v])) * st.rot[v]);
        if (lay.cen_dim[v] == 2) {
          const Vec3 moved = st.cen[v] + detail::tangent_basis(st.cen[v]) * dc.segment<2>(lay.cen[v]);
          trial.cen[v] = baseline * moved.normalized();
        } else {
          trial.cen[v] = st.cen[v] + dc.segment<3>(lay.cen[v]);
        }
        scale2 += st.cen[v].squaredNorm();
      }
      if (lay.foc[v] >= 0) trial.fscale[v] = st.fscale[v] * std::exp(dc[lay.foc[v]]);
    }
    for (int j = 0; j < nt; ++j) {
      trial.pts[j] = st.pts[j] + dp[j];
      step2 += dp[j].squaredNorm();
      scale2 += st.pts[j].squaredNorm();
    }
    if (std::sqrt(step2) < 1e-15 * (1.0 + std::sqrt(scale2))) {
      rep.termination = "small_step";
      break;
    }

    const auto [tcost, tsq] = evaluate(trial);
    ++rep.evaluations;
    if (tcost < cost) {
      const double rel = (cost - tcost) / std::max(cost, std::numeric_limits<double>::min());
      st = std::move(trial);
      cost = tcost;
      rmse = std::sqrt(tsq / nobs);
      ++rep.iterations;
      rejections = 0;
      lambda = std::max(lambda / 10.0, 1e-12);
      if (rmse < opt.rmse_tolerance) {
        rep.termination = "converged";
      } else if (rel < opt.relative_tolerance) {
        rep.termination = "relative_cost_change";
      }
    } else {
      lambda *= 10.0;
      if (++rejections >= opt.max_rejections) {
        rep.stalled = true;
        rep.termination = "stalled";
      }
    }
  }

  rep.final_rmse = rmse;
  rep.final_cost = cost;

  // Back to the caller's frame.
  const CameraPose g_inv = g.inverse();
  for (int v = 0; v < nv && !full; ++v) rep.pose_deltas.push_back({});
  for (int v = 0; v < nv && full; ++v) {
    const CameraPose anchored_pose = CameraPose::from_center(st.rot[v], st.cen[v]);
    const CameraPose out = v == 0 ? g : anchored_pose * g;
    PoseDelta d;
    d.rotation_deg = rotation_angle(out.rotation(), rig.poses[v].rotation()) * 180.0 / std::numbers::pi;
    d.translation = (out.center() - rig.poses[v].center()).norm();
    rep.pose_deltas.push_back(d);
    rig.poses[v] = out;
    rig.intrinsics[v].fx *= st.fscale[v];
    rig.intrinsics[v].fy *= st.fscale[v];
  }
  for (int j = 0; j < nt; ++j) matches.tracks[j].point = g_inv.transform(st.pts[j]);
  return rep;
}

/// Reprojection RMSE of all visible observations (px).
inline double reprojection_rmse(const CameraRig& rig, const MatchSet& matches) {
  double sq = 0.0;
  std::size_t n = 0;
  for (const auto& t : matches.tracks) {
    for (const auto& o : t.observations) {
      if (!o.visible) continue;
      const auto px = project(t.point, rig.intrinsics[o.view], rig.poses[o.view]);
      if (!px) continue;
      sq += (*px - o.pixel).squaredNorm();
      ++n;
    }
  }
  return n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
}

}  // namespace gbr
