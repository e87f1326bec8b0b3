#include "mscalib/pnp.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>

#include "mscalib/error.hpp"
#include "mscalib/geometry.hpp"
#include "mscalib/homography.hpp"
#include "mscalib/rng.hpp"

namespace mscalib {

namespace {

constexpr int kSampleSize = 6;
constexpr double kConfidence = 0.9999;
constexpr int kMaxIterations = 10000;
// Relative scatter thickness below which a sample is treated as coplanar.
constexpr double kPlanarThicknessRatio = 0.02;

Mat3 closest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

struct SampleFrame {
  Vec3 centroid = Vec3::Zero();
  Mat3 axes = Mat3::Identity();  // columns: e1, e2, normal (descending spread)
  double thickness = 0.0;
  double extent = 0.0;
};

SampleFrame analyze_points(std::span<const ScenePoint> points, std::span<const int> idx) {
  SampleFrame f;
  for (int i : idx) f.centroid += points[i];
  f.centroid /= static_cast<double>(idx.size());
  Mat3 cov = Mat3::Zero();
  for (int i : idx) {
    const Vec3 d = points[i] - f.centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  f.axes.col(0) = eig.eigenvectors().col(2);
  f.axes.col(1) = eig.eigenvectors().col(1);
  f.axes.col(2) = eig.eigenvectors().col(0);
  if (f.axes.determinant() < 0.0) f.axes.col(2) *= -1.0;
  f.thickness = std::sqrt(std::max(eig.eigenvalues()(0), 0.0));
  f.extent = std::sqrt(std::max(eig.eigenvalues()(2), 0.0));
  return f;
}

// Resection for coplanar points: homography from in-plane coordinates to the
// normalized image, then R and t from its columns (Zhang's extraction).
Pose pose_from_planar_points(std::span<const ScenePoint> points3d,
                             std::span<const NormalizedPoint> points2d, std::span<const int> idx,
                             const SampleFrame& frame) {
  std::vector<NormalizedMatch> matches(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Vec3 d = points3d[idx[k]] - frame.centroid;
    matches[k].a = {frame.axes.col(0).dot(d), frame.axes.col(1).dot(d)};
    matches[k].b = points2d[idx[k]];
  }
  const Mat3 g = fit_homography_dlt(matches).m;

  Pose best;
  bool found = false;
  for (int sign : {1, -1}) {
    const Mat3 gs = sign * g;
    const double scale = 0.5 * (gs.col(0).norm() + gs.col(1).norm());
    if (scale < 1e-15) continue;
    Mat3 cols;
    cols.col(0) = gs.col(0) / scale;
    cols.col(1) = gs.col(1) / scale;
    cols.col(2) = cols.col(0).cross(cols.col(1));
    const Mat3 c = closest_rotation(cols);
    // R maps world to camera: R * [e1 e2 n] = [c1 c2 c3].
    const Mat3 r = c * frame.axes.transpose();
    const Vec3 t = gs.col(2) / scale - r * frame.centroid;

    double mean_depth = 0.0;
    for (int i : idx) mean_depth += (r * points3d[i] + t).z();
    if (mean_depth > 0.0) {
      best = Pose::from_matrix(r, t);
      found = true;
      break;
    }
  }
  if (!found) raise(ErrorCode::DegenerateGeometry, "no cheirality-consistent planar pose");
  return best;
}

// 11-dof DLT resection for points in general position.
Pose pose_from_dlt(std::span<const ScenePoint> points3d,
                   std::span<const NormalizedPoint> points2d, std::span<const int> idx,
                   const SampleFrame& frame) {
  const double scale = frame.extent > 1e-15 ? 1.0 / frame.extent : 1.0;

  Eigen::MatrixXd design(2 * idx.size(), 12);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Vec3 xs = (points3d[idx[k]] - frame.centroid) * scale;
    const NormalizedPoint& u = points2d[idx[k]];
    design.row(2 * k) << xs.x(), xs.y(), xs.z(), 1.0, 0.0, 0.0, 0.0, 0.0, -u.x() * xs.x(),
        -u.x() * xs.y(), -u.x() * xs.z(), -u.x();
    design.row(2 * k + 1) << 0.0, 0.0, 0.0, 0.0, xs.x(), xs.y(), xs.z(), 1.0, -u.y() * xs.x(),
        -u.y() * xs.y(), -u.y() * xs.z(), -u.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  if (svd.singularValues()(10) <= 1e-9 * svd.singularValues()(0))
    raise(ErrorCode::DegenerateGeometry, "resection system is rank deficient");

  const Eigen::Matrix<double, 12, 1> p = svd.matrixV().col(11);
  Mat34 proj;
  proj << p(0), p(1), p(2), p(3), p(4), p(5), p(6), p(7), p(8), p(9), p(10), p(11);
  // Undo the conditioning transform X -> (X - c) * s.
  Mat34 unnorm;
  unnorm.leftCols<3>() = proj.leftCols<3>() * scale;
  unnorm.col(3) = proj.col(3) - proj.leftCols<3>() * (frame.centroid * scale);

  Mat3 m = unnorm.leftCols<3>();
  Vec3 t = unnorm.col(3);
  if (m.determinant() < 0.0) {
    m = -m;
    t = -t;
  }
  Eigen::JacobiSVD<Mat3> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = msvd.singularValues();
  if (sv(2) <= 0.05 * sv(0))
    raise(ErrorCode::DegenerateGeometry, "near-planar sample in DLT resection");
  const double s = sv.mean();
  const Mat3 r = closest_rotation(m / s);
  return Pose::from_matrix(r, t / s);
}

Pose pose_from_minimal_sample(std::span<const ScenePoint> points3d,
                              std::span<const NormalizedPoint> points2d,
                              std::span<const int> idx) {
  const SampleFrame frame = analyze_points(points3d, idx);
  if (frame.extent < 1e-12) raise(ErrorCode::DegenerateGeometry, "coincident sample points");
  if (frame.thickness < kPlanarThicknessRatio * frame.extent)
    return pose_from_planar_points(points3d, points2d, idx, frame);
  return pose_from_dlt(points3d, points2d, idx, frame);
}

int required_iterations(int inliers, int total) {
  const double w = static_cast<double>(inliers) / static_cast<double>(total);
  const double p_sample = std::pow(w, kSampleSize);
  if (p_sample >= 1.0) return 0;
  if (p_sample <= 1e-12) return kMaxIterations;
  const double n = std::log(1.0 - kConfidence) / std::log(1.0 - p_sample);
  if (!(n < static_cast<double>(kMaxIterations))) return kMaxIterations;
  return static_cast<int>(std::ceil(n));
}

}  // namespace

Pose refine_pose(const CameraIntrinsics& intr, const Pose& initial,
                 std::span<const ScenePoint> points3d, std::span<const PixelPoint> points2d,
                 int max_iterations) {
  Pose pose = initial;
  const std::size_t n = points3d.size();

  auto cost_of = [&](const Pose& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 pc = p.apply(points3d[i]);
      if (!(pc.z() > 1e-12)) return std::numeric_limits<double>::infinity();
      const PixelPoint proj(intr.fx * pc.x() / pc.z() + intr.cx,
                            intr.fy * pc.y() / pc.z() + intr.cy);
      c += (proj - points2d[i]).squaredNorm();
    }
    return c;
  };

  double cost = cost_of(pose);
  if (!std::isfinite(cost)) return pose;

  double lambda = 1e-3;
  for (int iter = 0; iter < max_iterations; ++iter) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const auto jac = projection_jacobian(intr, pose, points3d[i]);
      const Vec3 pc = pose.apply(points3d[i]);
      const Vec2 r(intr.fx * pc.x() / pc.z() + intr.cx - points2d[i].x(),
                   intr.fy * pc.y() / pc.z() + intr.cy - points2d[i].y());
      h += jac.pose.transpose() * jac.pose;
      g -= jac.pose.transpose() * r;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::Matrix<double, 6, 6> ha = h;
      for (int d = 0; d < 6; ++d) ha(d, d) += lambda * std::max(h(d, d), 1e-12);
      const Eigen::Matrix<double, 6, 1> delta = ha.ldlt().solve(g);
      const Pose trial = retract_pose(pose, delta);
      const double trial_cost = cost_of(trial);
      if (trial_cost < cost) {
        const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
        pose = trial;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (rel < 1e-12) iter = max_iterations;  // converged
        break;
      }
      lambda = std::min(lambda * 4.0, 1e10);
    }
    if (!accepted) break;
  }
  return pose;
}

PnpResult solve_pnp_ransac(std::span<const ScenePoint> points3d,
                           std::span<const PixelPoint> points2d, const CameraIntrinsics& intr,
                           std::uint64_t seed, double threshold_px) {
  const int n = static_cast<int>(points3d.size());
  if (n != static_cast<int>(points2d.size()))
    raise(ErrorCode::ShapeMismatch, "2D and 3D correspondence counts differ");
  if (n < kSampleSize) raise(ErrorCode::InsufficientMatches, "PnP needs >= 6 correspondences");

  std::vector<NormalizedPoint> normalized(n);
  for (int i = 0; i < n; ++i) normalized[i] = intr.normalize(points2d[i]);

  Rng rng(seed);
  std::vector<std::uint8_t> mask(n), best_mask(n);
  Pose best_pose;
  int best_count = 0;
  int needed = kMaxIterations;

  for (int iter = 0; iter < needed; ++iter) {
    std::array<int, kSampleSize> idx{};
    for (int j = 0; j < kSampleSize; ++j) {
      for (;;) {
        const int cand = static_cast<int>(rng.uniform_index(n));
        if (std::find(idx.begin(), idx.begin() + j, cand) == idx.begin() + j) {
          idx[j] = cand;
          break;
        }
      }
    }

    Pose pose;
    try {
      pose = pose_from_minimal_sample(points3d, normalized, std::span<const int>(idx.data(), 6));
    } catch (const Error&) {
      continue;
    }

    int count = 0;
    for (int i = 0; i < n; ++i) {
      const double err = reprojection_error_px(intr, pose, points3d[i], points2d[i]);
      mask[i] = err < threshold_px ? 1 : 0;
      count += mask[i];
    }
    if (count > best_count) {
      best_count = count;
      best_pose = pose;
      best_mask = mask;
      needed = std::min(kMaxIterations, std::max(iter + 1, required_iterations(best_count, n)));
    }
  }

  if (best_count < kSampleSize)
    raise(ErrorCode::NoConsensus,
          "PnP consensus of " + std::to_string(best_count) + " is below the minimum");

  std::vector<ScenePoint> in3d;
  std::vector<PixelPoint> in2d;
  in3d.reserve(best_count);
  in2d.reserve(best_count);
  for (int i = 0; i < n; ++i) {
    if (!best_mask[i]) continue;
    in3d.push_back(points3d[i]);
    in2d.push_back(points2d[i]);
  }

  PnpResult result;
  result.pose = refine_pose(intr, best_pose, in3d, in2d);
  result.inlier_mask = std::move(best_mask);
  result.inlier_count = best_count;
  return result;
}

}  // namespace mscalib
