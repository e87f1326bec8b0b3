#include "mscalib/bundle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mscalib/error.hpp"
#include "mscalib/geometry.hpp"

namespace mscalib {

namespace {

constexpr double kDepthEps = 1e-12;
constexpr double kLambdaInit = 1e-4;
constexpr double kLambdaMin = 1e-12;
constexpr double kLambdaMax = 1e12;

// Orthonormal basis of the plane orthogonal to t.
Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& t) {
  const Vec3 tn = t.normalized();
  Vec3 axis = Vec3::UnitX();
  if (std::abs(tn.y()) < std::abs(tn.x())) axis = Vec3::UnitY();
  if (std::abs(tn.z()) < std::abs(tn.x()) && std::abs(tn.z()) < std::abs(tn.y()))
    axis = Vec3::UnitZ();
  Eigen::Matrix<double, 3, 2> b;
  b.col(0) = tn.cross(axis).normalized();
  b.col(1) = tn.cross(b.col(0));
  return b;
}

struct CamEntry {
  int camera_id = 0;
  const CameraIntrinsics* intr = nullptr;
  Pose pose;
  int offset = -1;       // -1: gauge-fixed
  int dof = 0;           // 6 free, 5 fixed-norm translation, 0 fixed
  double t_norm = 1.0;   // preserved baseline length of the scale camera
};

struct ObsEntry {
  int cam = 0;
  Vec2 pixel = Vec2::Zero();
};

struct Problem {
  std::vector<CamEntry> cams;
  std::map<int, int> cam_index;
  int scale_cam = -1;  // index into cams
  bool coplanar = false;
  int plane_offset = -1;
  int total_dof = 0;

  std::vector<int> point_ids;
  std::vector<Vec3> xyz;  // world positions (derived in coplanar mode)
  std::vector<Vec2> uv;   // in-plane coordinates (coplanar mode)
  PlaneFrame frame;

  std::vector<ObsEntry> obs;
  std::vector<int> point_begin;  // size points + 1
};

struct GaugeCams {
  int gauge_id;
  int scale_id;
};

GaugeCams gauge_cameras(const Reconstruction& recon) {
  if (recon.initial_pair.first >= 0 && recon.cameras.count(recon.initial_pair.first) &&
      recon.cameras.count(recon.initial_pair.second))
    return {recon.initial_pair.first, recon.initial_pair.second};
  // Reconstructions built by hand: lowest two registered ids fix the gauge.
  int first = -1, second = -1;
  for (const auto& [id, cam] : recon.cameras) {
    if (!cam.registered) continue;
    if (first < 0)
      first = id;
    else if (second < 0)
      second = id;
  }
  return {first, second};
}

Problem build_problem(const Reconstruction& recon, const CorrespondenceGraph& graph,
                      bool coplanar) {
  Problem p;
  p.coplanar = coplanar;

  const GaugeCams gauge = gauge_cameras(recon);
  int offset = 0;
  for (const auto& [id, cam] : recon.cameras) {
    if (!cam.registered) continue;
    CamEntry entry;
    entry.camera_id = id;
    entry.intr = &graph.intrinsics(id);
    entry.pose = cam.pose;
    if (id == gauge.gauge_id) {
      entry.dof = 0;
    } else if (id == gauge.scale_id) {
      entry.dof = 5;
      entry.t_norm = cam.pose.translation.norm();
    } else {
      entry.dof = 6;
    }
    entry.offset = entry.dof > 0 ? offset : -1;
    offset += entry.dof;
    p.cam_index[id] = static_cast<int>(p.cams.size());
    if (id == gauge.scale_id) p.scale_cam = static_cast<int>(p.cams.size());
    p.cams.push_back(entry);
  }
  if (coplanar) {
    p.plane_offset = offset;
    offset += 3;
  }
  p.total_dof = offset;

  p.point_begin.push_back(0);
  const auto& tracks = graph.tracks();
  std::vector<ObsEntry> eligible;
  for (const auto& [id, x] : recon.points) {
    const auto it = tracks.find(id);
    if (it == tracks.end()) continue;
    eligible.clear();
    for (const auto& track_obs : it->second) {
      const auto cam_it = p.cam_index.find(track_obs.camera_id);
      if (cam_it == p.cam_index.end()) continue;
      eligible.push_back({cam_it->second, track_obs.pixel});
    }
    if (eligible.size() < 2) continue;  // underdetermined on its own
    p.obs.insert(p.obs.end(), eligible.begin(), eligible.end());
    p.point_ids.push_back(id);
    p.xyz.push_back(x);
    p.point_begin.push_back(static_cast<int>(p.obs.size()));
  }

  if (coplanar) {
    p.frame = fit_plane_frame(p.xyz);
    p.uv.resize(p.xyz.size());
    for (std::size_t i = 0; i < p.xyz.size(); ++i) {
      const Vec3 d = p.xyz[i] - p.frame.origin;
      p.uv[i] = {p.frame.e1.dot(d), p.frame.e2.dot(d)};
      p.xyz[i] = p.frame.origin + p.uv[i].x() * p.frame.e1 + p.uv[i].y() * p.frame.e2;
    }
  }
  return p;
}

struct TrialState {
  std::vector<Pose> poses;
  std::vector<Vec3> xyz;
  std::vector<Vec2> uv;
  PlaneFrame frame;
};

PlaneFrame apply_plane_step(const PlaneFrame& frame, const Vec3& delta) {
  PlaneFrame out = frame;
  out.origin += delta.z() * frame.normal;
  const Vec3 w = delta.x() * frame.e1 + delta.y() * frame.e2;
  const double angle = w.norm();
  if (angle > 1e-300) {
    const Mat3 r = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
    out.e1 = r * frame.e1;
    out.e2 = r * frame.e2;
    out.normal = r * frame.normal;
  }
  return out;
}

double evaluate_cost(const Problem& p, const std::vector<Pose>& poses,
                     const std::vector<Vec3>& xyz) {
  double total = 0.0;
  const int num_points = static_cast<int>(p.point_ids.size());
  for (int pi = 0; pi < num_points; ++pi) {
    for (int oi = p.point_begin[pi]; oi < p.point_begin[pi + 1]; ++oi) {
      const ObsEntry& ob = p.obs[oi];
      const CameraIntrinsics& intr = *p.cams[ob.cam].intr;
      const Vec3 pc = poses[ob.cam].apply(xyz[pi]);
      if (!(pc.z() > kDepthEps)) return std::numeric_limits<double>::infinity();
      const Vec2 r(intr.fx * pc.x() / pc.z() + intr.cx - ob.pixel.x(),
                   intr.fy * pc.y() / pc.z() + intr.cy - ob.pixel.y());
      total += r.squaredNorm();
    }
  }
  return total;
}

double robust_cost(const Problem& p, const std::vector<Pose>& poses,
                   const std::vector<Vec3>& xyz, double huber_k) {
  if (huber_k <= 0.0) return evaluate_cost(p, poses, xyz);
  double total = 0.0;
  const int num_points = static_cast<int>(p.point_ids.size());
  for (int pi = 0; pi < num_points; ++pi) {
    for (int oi = p.point_begin[pi]; oi < p.point_begin[pi + 1]; ++oi) {
      const ObsEntry& ob = p.obs[oi];
      const CameraIntrinsics& intr = *p.cams[ob.cam].intr;
      const Vec3 pc = poses[ob.cam].apply(xyz[pi]);
      if (!(pc.z() > kDepthEps)) return std::numeric_limits<double>::infinity();
      const Vec2 r(intr.fx * pc.x() / pc.z() + intr.cx - ob.pixel.x(),
                   intr.fy * pc.y() / pc.z() + intr.cy - ob.pixel.y());
      const double norm = r.norm();
      total += norm <= huber_k ? r.squaredNorm() : 2.0 * huber_k * norm - huber_k * huber_k;
    }
  }
  return total;
}

// Cached linearization: per-point Hessian blocks for the Schur elimination.
struct Linearization {
  Eigen::MatrixXd s0;  // global-global terms (upper triangle filled)
  Eigen::VectorXd g0;
  // per point, per coupled global block
  struct Coupling {
    int offset;
    int dof;
    Eigen::Matrix<double, 6, 3> w;  // top-left dof x pdim used
  };
  std::vector<Eigen::Matrix3d> v;  // top-left pdim x pdim used
  std::vector<Eigen::Vector3d> gp;
  std::vector<std::vector<Coupling>> couplings;
  int pdim = 3;
};

void linearize(const Problem& p, const std::vector<Pose>& poses, const std::vector<Vec3>& xyz,
               const std::vector<Eigen::Matrix<double, 3, 2>>& scale_basis, double huber_k,
               Linearization& lin) {
  const int num_points = static_cast<int>(p.point_ids.size());
  lin.pdim = p.coplanar ? 2 : 3;
  lin.s0.setZero(p.total_dof, p.total_dof);
  lin.g0.setZero(p.total_dof);
  lin.v.assign(num_points, Eigen::Matrix3d::Zero());
  lin.gp.assign(num_points, Eigen::Vector3d::Zero());
  lin.couplings.assign(num_points, {});

  const int pdim = lin.pdim;
  for (int pi = 0; pi < num_points; ++pi) {
    auto& point_couplings = lin.couplings[pi];
    point_couplings.reserve(p.point_begin[pi + 1] - p.point_begin[pi] + (p.coplanar ? 1 : 0));
    Eigen::Matrix<double, 6, 3> w_plane = Eigen::Matrix<double, 6, 3>::Zero();
    Eigen::Matrix3d u_plane = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g_plane = Eigen::Vector3d::Zero();
    const Vec2 uv = p.coplanar ? p.uv[pi] : Vec2(Vec2::Zero());

    for (int oi = p.point_begin[pi]; oi < p.point_begin[pi + 1]; ++oi) {
      const ObsEntry& ob = p.obs[oi];
      const CamEntry& cam = p.cams[ob.cam];
      const auto jac = projection_jacobian(*cam.intr, poses[ob.cam], xyz[pi]);
      const Vec3 pc = poses[ob.cam].apply(xyz[pi]);
      Vec2 r(cam.intr->fx * pc.x() / pc.z() + cam.intr->cx - ob.pixel.x(),
             cam.intr->fy * pc.y() / pc.z() + cam.intr->cy - ob.pixel.y());

      double weight = 1.0;
      if (huber_k > 0.0) {
        const double norm = r.norm();
        if (norm > huber_k) weight = huber_k / norm;
      }

      // Point jacobian: world position directly, or the in-plane (u, v).
      Eigen::Matrix<double, 2, 3> jp_full = jac.point;
      Eigen::Matrix<double, 2, 3> jp = Eigen::Matrix<double, 2, 3>::Zero();
      if (p.coplanar) {
        jp.col(0) = jp_full * p.frame.e1;
        jp.col(1) = jp_full * p.frame.e2;
      } else {
        jp = jp_full;
      }

      // Camera jacobian restricted to the local parametrization.
      Eigen::Matrix<double, 2, 6> jc = Eigen::Matrix<double, 2, 6>::Zero();
      if (cam.dof == 6) {
        jc = jac.pose;
      } else if (cam.dof == 5) {
        jc.leftCols<3>() = jac.pose.leftCols<3>();
        jc.block<2, 2>(0, 3) = jac.pose.rightCols<3>() * scale_basis[ob.cam];
      }

      if (weight != 1.0) {
        const double sw = std::sqrt(weight);
        r *= sw;
        jp *= sw;
        jc *= sw;
      }

      lin.v[pi].topLeftCorner(pdim, pdim).noalias() +=
          jp.leftCols(pdim).transpose() * jp.leftCols(pdim);
      lin.gp[pi].head(pdim).noalias() -= jp.leftCols(pdim).transpose() * r;

      if (cam.dof > 0) {
        lin.s0.block(cam.offset, cam.offset, cam.dof, cam.dof).noalias() +=
            jc.leftCols(cam.dof).transpose() * jc.leftCols(cam.dof);
        lin.g0.segment(cam.offset, cam.dof).noalias() -= jc.leftCols(cam.dof).transpose() * r;

        Linearization::Coupling coupling;
        coupling.offset = cam.offset;
        coupling.dof = cam.dof;
        coupling.w.setZero();
        coupling.w.topLeftCorner(cam.dof, pdim).noalias() =
            jc.leftCols(cam.dof).transpose() * jp.leftCols(pdim);
        point_couplings.push_back(coupling);
      }

      if (p.coplanar) {
        // d(world point)/d(plane tilt a, tilt b, offset c) at the identity:
        // [v * n, -u * n, n].
        Eigen::Matrix<double, 2, 3> jpl;
        jpl.col(0) = jp_full * (uv.y() * p.frame.normal);
        jpl.col(1) = jp_full * (-uv.x() * p.frame.normal);
        jpl.col(2) = jp_full * p.frame.normal;
        if (weight != 1.0) jpl *= std::sqrt(weight);

        u_plane.noalias() += jpl.transpose() * jpl;
        g_plane.noalias() -= jpl.transpose() * r;
        w_plane.topLeftCorner(3, pdim).noalias() += jpl.transpose() * jp.leftCols(pdim);
        if (cam.dof > 0)
          lin.s0.block(cam.offset, p.plane_offset, cam.dof, 3).noalias() +=
              jc.leftCols(cam.dof).transpose() * jpl;
      }
    }

    if (p.coplanar) {
      lin.s0.block(p.plane_offset, p.plane_offset, 3, 3) += u_plane;
      lin.g0.segment(p.plane_offset, 3) += g_plane;
      Linearization::Coupling coupling;
      coupling.offset = p.plane_offset;
      coupling.dof = 3;
      coupling.w = w_plane;
      point_couplings.push_back(coupling);
    }
  }
}

// Solves the lambda-augmented reduced camera system and back-substitutes the
// point updates. Returns false when the factorization fails.
bool solve_step(const Problem& p, const Linearization& lin, double lambda,
                Eigen::VectorXd& delta_global, std::vector<Eigen::Vector3d>& delta_points) {
  const int d = p.total_dof;
  const int pdim = lin.pdim;
  Eigen::MatrixXd s = lin.s0;
  Eigen::VectorXd rhs = lin.g0;
  for (int i = 0; i < d; ++i) s(i, i) += lambda * std::max(lin.s0(i, i), 1e-12);

  const int num_points = static_cast<int>(p.point_ids.size());
  std::vector<Eigen::Matrix3d> vinv(num_points);
  for (int pi = 0; pi < num_points; ++pi) {
    Eigen::Matrix3d va = Eigen::Matrix3d::Identity();
    va.topLeftCorner(pdim, pdim) = lin.v[pi].topLeftCorner(pdim, pdim);
    for (int i = 0; i < pdim; ++i) va(i, i) += lambda * std::max(lin.v[pi](i, i), 1e-12);
    Eigen::Matrix3d inv = Eigen::Matrix3d::Zero();
    if (pdim == 2) {
      const double det = va(0, 0) * va(1, 1) - va(0, 1) * va(1, 0);
      if (!(std::abs(det) > 1e-300)) return false;
      inv(0, 0) = va(1, 1) / det;
      inv(1, 1) = va(0, 0) / det;
      inv(0, 1) = -va(0, 1) / det;
      inv(1, 0) = -va(1, 0) / det;
    } else {
      const double det = va.determinant();
      if (!(std::abs(det) > 1e-300)) return false;
      inv = va.inverse();
    }
    vinv[pi] = inv;

    const Eigen::Vector3d y = inv.topLeftCorner(pdim, pdim) * lin.gp[pi].head(pdim);
    const auto& couplings = lin.couplings[pi];
    for (std::size_t i = 0; i < couplings.size(); ++i) {
      const auto& ci = couplings[i];
      rhs.segment(ci.offset, ci.dof).noalias() -= ci.w.topLeftCorner(ci.dof, pdim) * y;
      for (std::size_t j = i; j < couplings.size(); ++j) {
        const auto& cj = couplings[j];
        s.block(ci.offset, cj.offset, ci.dof, cj.dof).noalias() -=
            ci.w.topLeftCorner(ci.dof, pdim) * inv.topLeftCorner(pdim, pdim) *
            cj.w.topLeftCorner(cj.dof, pdim).transpose();
      }
    }
  }

  s.triangularView<Eigen::StrictlyLower>() = s.transpose().triangularView<Eigen::StrictlyLower>();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success) return false;
  delta_global = ldlt.solve(rhs);
  if (!delta_global.allFinite()) return false;

  delta_points.assign(num_points, Eigen::Vector3d::Zero());
  for (int pi = 0; pi < num_points; ++pi) {
    Eigen::Vector3d acc = lin.gp[pi];
    for (const auto& c : lin.couplings[pi])
      acc.head(pdim).noalias() -=
          c.w.topLeftCorner(c.dof, pdim).transpose() * delta_global.segment(c.offset, c.dof);
    delta_points[pi].head(pdim) = vinv[pi].topLeftCorner(pdim, pdim) * acc.head(pdim);
  }
  return true;
}

TrialState apply_step(const Problem& p, const std::vector<Pose>& poses,
                      const std::vector<Eigen::Matrix<double, 3, 2>>& scale_basis,
                      const Eigen::VectorXd& delta_global,
                      const std::vector<Eigen::Vector3d>& delta_points) {
  TrialState trial;
  trial.poses = poses;
  for (std::size_t ci = 0; ci < p.cams.size(); ++ci) {
    const CamEntry& cam = p.cams[ci];
    if (cam.dof == 6) {
      trial.poses[ci] = retract_pose(poses[ci], delta_global.segment<6>(cam.offset));
    } else if (cam.dof == 5) {
      Eigen::Matrix<double, 6, 1> d6;
      d6.head<3>() = delta_global.segment<3>(cam.offset);
      d6.tail<3>().setZero();
      Pose moved = retract_pose(poses[ci], d6);
      // Fixed-norm translation: step in the tangent plane, then renormalize.
      moved.translation =
          (poses[ci].translation + scale_basis[ci] * delta_global.segment<2>(cam.offset + 3))
              .normalized() *
          cam.t_norm;
      trial.poses[ci] = moved;
    }
  }

  if (p.coplanar) {
    trial.frame = apply_plane_step(p.frame, delta_global.segment<3>(p.plane_offset));
    trial.uv.resize(p.uv.size());
    trial.xyz.resize(p.uv.size());
    for (std::size_t pi = 0; pi < p.uv.size(); ++pi) {
      trial.uv[pi] = p.uv[pi] + delta_points[pi].head<2>();
      trial.xyz[pi] = trial.frame.origin + trial.uv[pi].x() * trial.frame.e1 +
                      trial.uv[pi].y() * trial.frame.e2;
    }
  } else {
    trial.xyz.resize(p.xyz.size());
    for (std::size_t pi = 0; pi < p.xyz.size(); ++pi)
      trial.xyz[pi] = p.xyz[pi] + delta_points[pi];
  }
  return trial;
}

}  // namespace

PlaneFrame fit_plane_frame(std::span<const ScenePoint> points) {
  if (points.size() < 3)
    raise(ErrorCode::DegenerateConfiguration, "plane fit needs >= 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const auto& x : points) centroid += x;
  centroid /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& x : points) {
    const Vec3 d = x - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  if (!(eig.eigenvalues()(1) > 1e-12 * std::max(eig.eigenvalues()(2), 1e-300)))
    raise(ErrorCode::DegenerateConfiguration, "points are collinear");

  PlaneFrame frame;
  frame.origin = centroid;
  frame.e1 = eig.eigenvectors().col(2);
  frame.normal = eig.eigenvectors().col(0);
  // Deterministic signs: largest component of each axis positive.
  const auto canonical = [](Vec3 v) {
    int k = 0;
    v.cwiseAbs().maxCoeff(&k);
    return v(k) < 0.0 ? Vec3(-v) : v;
  };
  frame.e1 = canonical(frame.e1);
  frame.normal = canonical(frame.normal);
  frame.e2 = frame.normal.cross(frame.e1);
  return frame;
}

BundleSummary bundle_adjust(Reconstruction& recon, const CorrespondenceGraph& graph,
                            const SolverOptions& options, BundleMode mode) {
  (void)mode;  // pair/intermediate/global share the same mechanics
  options.validate();

  Problem p = build_problem(recon, graph, options.coplanarity);
  const int num_obs = static_cast<int>(p.obs.size());
  BundleSummary summary;
  if (num_obs == 0 || p.total_dof == 0) {
    refresh_residuals(recon, graph);
    summary.initial_cost = summary.final_cost = recon.final_mean_squared_cost;
    summary.converged = true;
    return summary;
  }

  const double huber_k =
      options.loss == SolverOptions::Loss::Huber ? options.huber_scale_px : 0.0;

  std::vector<Pose> poses(p.cams.size());
  for (std::size_t i = 0; i < p.cams.size(); ++i) poses[i] = p.cams[i].pose;

  double cost = robust_cost(p, poses, p.xyz, huber_k);
  if (!std::isfinite(cost))
    raise(ErrorCode::NonConvergence, "bundle adjustment entered with non-finite cost");
  summary.initial_cost = cost / num_obs;

  std::vector<Eigen::Matrix<double, 3, 2>> scale_basis(p.cams.size(),
                                                       Eigen::Matrix<double, 3, 2>::Zero());
  Linearization lin;
  Eigen::VectorXd delta_global;
  std::vector<Eigen::Vector3d> delta_points;

  double lambda = kLambdaInit;
  bool relinearize = true;
  const double tol = options.ba_relative_tolerance;

  while (summary.iterations < options.ba_max_iterations) {
    if (relinearize) {
      if (p.scale_cam >= 0)
        scale_basis[p.scale_cam] = tangent_basis(poses[p.scale_cam].translation);
      linearize(p, poses, p.xyz, scale_basis, huber_k, lin);
      relinearize = false;
    }

    ++summary.iterations;
    if (!solve_step(p, lin, lambda, delta_global, delta_points)) {
      lambda = std::min(lambda * 4.0, kLambdaMax);
      if (lambda >= kLambdaMax) break;
      continue;
    }

    const TrialState trial = apply_step(p, poses, scale_basis, delta_global, delta_points);
    const double trial_cost = robust_cost(p, trial.poses, trial.xyz, huber_k);

    if (trial_cost < cost) {
      const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
      poses = trial.poses;
      p.xyz = trial.xyz;
      if (p.coplanar) {
        p.uv = trial.uv;
        p.frame = trial.frame;
      }
      cost = trial_cost;
      ++summary.accepted_steps;
      lambda = std::max(lambda / 3.0, kLambdaMin);
      relinearize = true;
      if (rel < tol) {
        summary.converged = true;
        break;
      }
    } else {
      if (std::isfinite(trial_cost) &&
          std::abs(trial_cost - cost) <= tol * std::max(cost, 1e-300)) {
        summary.converged = true;  // flat: already at a minimum
        break;
      }
      lambda = std::min(lambda * 4.0, kLambdaMax);
      if (lambda >= kLambdaMax) break;
    }
  }

  for (std::size_t ci = 0; ci < p.cams.size(); ++ci) {
    auto& cam = recon.cameras.at(p.cams[ci].camera_id);
    cam.pose = poses[ci];
    cam.pose.normalize();
  }
  for (std::size_t pi = 0; pi < p.point_ids.size(); ++pi)
    recon.points.at(p.point_ids[pi]) = p.xyz[pi];
  if (p.coplanar) {
    recon.has_plane = true;
    recon.plane = p.frame;
  }

  refresh_residuals(recon, graph);
  summary.final_cost = cost / num_obs;
  return summary;
}

}  // namespace mscalib
