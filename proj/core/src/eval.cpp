#include "mscalib/eval.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "mscalib/error.hpp"
#include "mscalib/geometry.hpp"

namespace mscalib {

Sim3Transform Sim3Transform::inverse() const {
  Sim3Transform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = rotation.transpose();
  inv.translation = -inv.scale * (inv.rotation * translation);
  return inv;
}

Sim3Transform umeyama_align(std::span<const Vec3> source, std::span<const Vec3> target) {
  if (source.size() != target.size())
    raise(ErrorCode::ShapeMismatch, "point sets differ in size");
  const int n = static_cast<int>(source.size());
  if (n < 3) raise(ErrorCode::DegenerateConfiguration, "alignment needs >= 3 point pairs");

  Vec3 mean_src = Vec3::Zero(), mean_tgt = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    mean_src += source[i];
    mean_tgt += target[i];
  }
  mean_src /= n;
  mean_tgt /= n;

  Mat3 sigma = Mat3::Zero();
  double var_src = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 ds = source[i] - mean_src;
    const Vec3 dt = target[i] - mean_tgt;
    sigma += dt * ds.transpose();
    var_src += ds.squaredNorm();
  }
  sigma /= n;
  var_src /= n;
  if (var_src <= 1e-300) raise(ErrorCode::DegenerateConfiguration, "coincident source points");

  Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (d(1) <= 1e-12 * std::max(d(0), 1e-300))
    raise(ErrorCode::DegenerateConfiguration, "collinear source points");

  Vec3 s = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2) = -1.0;

  Sim3Transform out;
  out.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  out.scale = d.dot(s) / var_src;
  out.translation = mean_tgt - out.scale * (out.rotation * mean_src);
  return out;
}

PoseErrors pose_errors(const std::map<int, Pose>& estimated,
                       const std::map<int, Pose>& ground_truth, const Sim3Transform& alignment) {
  if (estimated.size() != ground_truth.size())
    raise(ErrorCode::IdMismatch, "camera id sets differ in size");
  double rot_sq = 0.0, trans_sq = 0.0;
  const Quat align_rotation(alignment.rotation);
  for (const auto& [id, est] : estimated) {
    const auto it = ground_truth.find(id);
    if (it == ground_truth.end())
      raise(ErrorCode::IdMismatch, "camera " + std::to_string(id) + " missing from ground truth");
    const Pose& gt = it->second;
    // Aligned estimated rotation maps the target world into the camera.
    const Quat aligned = (est.rotation * align_rotation.conjugate()).normalized();
    const double angle = rotation_angle(aligned, gt.rotation);
    rot_sq += angle * angle;
    trans_sq += (alignment.apply(est.center()) - gt.center()).squaredNorm();
  }
  const double n = static_cast<double>(estimated.size());
  PoseErrors out;
  out.rotation_rmse_deg = std::sqrt(rot_sq / n) * 180.0 / std::numbers::pi;
  out.translation_rmse = std::sqrt(trans_sq / n);
  return out;
}

Sim3Transform align_camera_centers(const std::map<int, Pose>& estimated,
                                   const std::map<int, Pose>& ground_truth) {
  if (estimated.size() != ground_truth.size())
    raise(ErrorCode::IdMismatch, "camera id sets differ in size");
  std::vector<Vec3> src, tgt;
  src.reserve(estimated.size());
  for (const auto& [id, est] : estimated) {
    const auto it = ground_truth.find(id);
    if (it == ground_truth.end())
      raise(ErrorCode::IdMismatch, "camera " + std::to_string(id) + " missing from ground truth");
    src.push_back(est.center());
    tgt.push_back(it->second.center());
  }
  return umeyama_align(src, tgt);
}

namespace {

// Point-only refinement with frozen poses.
ScenePoint refine_point(const std::vector<const Camera*>& cams,
                        const std::vector<PixelPoint>& pixels, ScenePoint x) {
  const auto cost_of = [&](const ScenePoint& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < cams.size(); ++i) {
      const double e = reprojection_error_px(cams[i]->intrinsics, cams[i]->pose, p, pixels[i]);
      if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
      c += e * e;
    }
    return c;
  };

  double cost = cost_of(x);
  if (!std::isfinite(cost)) return x;
  double lambda = 1e-4;
  for (int iter = 0; iter < 20; ++iter) {
    Mat3 h = Mat3::Zero();
    Vec3 g = Vec3::Zero();
    for (std::size_t i = 0; i < cams.size(); ++i) {
      const auto jac = projection_jacobian(cams[i]->intrinsics, cams[i]->pose, x);
      const Vec3 pc = cams[i]->pose.apply(x);
      const Vec2 r(cams[i]->intrinsics.fx * pc.x() / pc.z() + cams[i]->intrinsics.cx -
                       pixels[i].x(),
                   cams[i]->intrinsics.fy * pc.y() / pc.z() + cams[i]->intrinsics.cy -
                       pixels[i].y());
      h += jac.point.transpose() * jac.point;
      g -= jac.point.transpose() * r;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 6; ++attempt) {
      Mat3 ha = h;
      for (int k = 0; k < 3; ++k) ha(k, k) += lambda * std::max(h(k, k), 1e-12);
      const Vec3 delta = ha.ldlt().solve(g);
      const ScenePoint trial = x + delta;
      const double trial_cost = cost_of(trial);
      if (trial_cost < cost) {
        const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
        x = trial;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (rel < 1e-12) iter = 20;
        break;
      }
      lambda = std::min(lambda * 4.0, 1e10);
    }
    if (!accepted) break;
  }
  return x;
}

}  // namespace

HeldoutReport heldout_reprojection(const Reconstruction& recon, const ObservationSet& heldout,
                                   const IntrinsicsMap& intrinsics) {
  // Registered cameras as projection devices.
  std::map<int, Camera> cams;
  for (const auto& [id, sol] : recon.cameras) {
    if (!sol.registered) continue;
    const auto it = intrinsics.find(id);
    if (it == intrinsics.end())
      raise(ErrorCode::IdMismatch, "no intrinsics for camera " + std::to_string(id));
    cams[id] = Camera{id, it->second, sol.pose};
  }

  const auto tracks = heldout.tracks();
  // Coverage scores over the held-out observations choose the seed pair.
  std::map<int, std::vector<PixelPoint>> per_cam_pixels;
  for (const auto& obs : heldout.entries())
    if (cams.count(obs.camera_id)) per_cam_pixels[obs.camera_id].push_back(obs.pixel);
  std::map<int, int> scores;
  for (const auto& [id, pixels] : per_cam_pixels) {
    const auto& intr = cams.at(id).intrinsics;
    scores[id] = compute_view_score(pixels, intr.width, intr.height);
  }

  struct Acc {
    double sum_sq = 0.0;
    double max_norm = 0.0;
    int n = 0;
  };
  std::map<int, Acc> acc;
  int evaluated = 0, skipped = 0;

  for (const auto& [point_id, track] : tracks) {
    std::vector<const Camera*> observers;
    std::vector<PixelPoint> pixels;
    for (const auto& obs : track) {
      const auto it = cams.find(obs.camera_id);
      if (it == cams.end()) continue;
      observers.push_back(&it->second);
      pixels.push_back(obs.pixel);
    }
    if (observers.size() < 2) continue;

    std::vector<int> order(observers.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const int sa = scores.at(observers[a]->id);
      const int sb = scores.at(observers[b]->id);
      if (sa != sb) return sa > sb;
      return observers[a]->id < observers[b]->id;
    });

    ScenePoint x;
    try {
      const Camera& ca = *observers[order[0]];
      const Camera& cb = *observers[order[1]];
      x = triangulate_two_view(ca.intrinsics, ca.pose, cb.intrinsics, cb.pose, pixels[order[0]],
                               pixels[order[1]]);
    } catch (const Error&) {
      ++skipped;
      continue;
    }
    x = refine_point(observers, pixels, x);

    bool ok = true;
    for (const auto* cam : observers)
      if (!(depth_in_camera(cam->pose, x) > 0.0)) ok = false;
    if (!ok) {
      ++skipped;
      continue;
    }

    ++evaluated;
    for (std::size_t i = 0; i < observers.size(); ++i) {
      const double e =
          reprojection_error_px(observers[i]->intrinsics, observers[i]->pose, x, pixels[i]);
      auto& a = acc[observers[i]->id];
      a.sum_sq += e * e;
      a.max_norm = std::max(a.max_norm, e);
      ++a.n;
    }
  }

  if (evaluated == 0)
    raise(ErrorCode::NoEvaluableTracks, "no held-out track spans two registered cameras");

  HeldoutReport report;
  report.evaluated_tracks = evaluated;
  report.skipped_tracks = skipped;
  double total_sq = 0.0, total_max = 0.0;
  int total_n = 0;
  for (const auto& [id, a] : acc) {
    CameraReprojStats stats;
    stats.camera_id = id;
    stats.n_obs = a.n;
    stats.mean_px = std::sqrt(a.sum_sq / (2.0 * a.n));
    stats.max_px = a.max_norm;
    report.per_camera.push_back(stats);
    total_sq += a.sum_sq;
    total_n += a.n;
    total_max = std::max(total_max, a.max_norm);
  }
  report.overall_mean_px = std::sqrt(total_sq / (2.0 * total_n));
  report.overall_max_px = total_max;
  return report;
}

SuccessRates success_rate(std::span<const std::optional<double>> per_camera_mean_px,
                          const std::array<double, 3>& thresholds) {
  SuccessRates out;
  out.thresholds_px = thresholds;
  const int n = static_cast<int>(per_camera_mean_px.size());
  if (n == 0) return out;
  for (int t = 0; t < 3; ++t) {
    int ok = 0;
    for (const auto& mean : per_camera_mean_px)
      if (mean.has_value() && std::isfinite(*mean) && *mean < thresholds[t]) ++ok;
    out.percent[t] = static_cast<int>(std::lround(100.0 * ok / n));
  }
  return out;
}

}  // namespace mscalib
