#include "mscalib/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "mscalib/error.hpp"

namespace mscalib {

namespace {
constexpr double kMinDepth = 1e-12;
constexpr double kMinBaseline = 1e-9;
// Two smallest singular values closer than this ratio means the nullspace of
// the DLT system is not isolated.
constexpr double kMaxSingularValueRatio = 0.99;
}  // namespace

double depth_in_camera(const Pose& pose, const ScenePoint& point) {
  return (pose.rotation * point + pose.translation).z();
}

PixelPoint project(const CameraIntrinsics& intr, const Pose& pose, const ScenePoint& point) {
  const Vec3 pc = pose.apply(point);
  if (!(pc.z() > kMinDepth))
    raise(ErrorCode::NonPositiveDepth, "point at depth " + std::to_string(pc.z()));
  return {intr.fx * pc.x() / pc.z() + intr.cx, intr.fy * pc.y() / pc.z() + intr.cy};
}

Vec3 backproject_ray(const CameraIntrinsics& intr, const Pose& pose, const PixelPoint& pixel) {
  const NormalizedPoint xn = intr.normalize(pixel);
  const Vec3 dir_cam(xn.x(), xn.y(), 1.0);
  return (pose.rotation.conjugate() * dir_cam).normalized();
}

double reprojection_error_px(const CameraIntrinsics& intr, const Pose& pose,
                             const ScenePoint& point, const PixelPoint& observed) {
  const Vec3 pc = pose.apply(point);
  if (!(pc.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
  const PixelPoint proj(intr.fx * pc.x() / pc.z() + intr.cx, intr.fy * pc.y() / pc.z() + intr.cy);
  return (proj - observed).norm();
}

ScenePoint triangulate_two_view_normalized(const Pose& pose_a, const Pose& pose_b,
                                           const NormalizedPoint& xa, const NormalizedPoint& xb) {
  if ((pose_a.center() - pose_b.center()).norm() <= kMinBaseline)
    raise(ErrorCode::DegenerateGeometry, "zero baseline between views");

  Mat34 pa, pb;
  pa.leftCols<3>() = pose_a.matrix();
  pa.col(3) = pose_a.translation;
  pb.leftCols<3>() = pose_b.matrix();
  pb.col(3) = pose_b.translation;

  // HZ 12.2: rows x*p3 - p1, y*p3 - p2 for each view.
  Eigen::Matrix4d design;
  design.row(0) = xa.x() * pa.row(2) - pa.row(0);
  design.row(1) = xa.y() * pa.row(2) - pa.row(1);
  design.row(2) = xb.x() * pb.row(2) - pb.row(0);
  design.row(3) = xb.y() * pb.row(2) - pb.row(1);
  for (int r = 0; r < 4; ++r) {
    const double n = design.row(r).norm();
    if (n > 0.0) design.row(r) /= n;
  }

  Eigen::JacobiSVD<Eigen::Matrix4d> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(2) > 0.0 && sv(3) / sv(2) > kMaxSingularValueRatio)
    raise(ErrorCode::DegenerateGeometry, "near-parallel viewing rays");

  const Vec4 xh = svd.matrixV().col(3);
  if (std::abs(xh(3)) < 1e-14)
    raise(ErrorCode::DegenerateGeometry, "triangulated point at infinity");
  return xh.head<3>() / xh(3);
}

ScenePoint triangulate_two_view(const CameraIntrinsics& intr_a, const Pose& pose_a,
                                const CameraIntrinsics& intr_b, const Pose& pose_b,
                                const PixelPoint& xa, const PixelPoint& xb) {
  return triangulate_two_view_normalized(pose_a, pose_b, intr_a.normalize(xa),
                                         intr_b.normalize(xb));
}

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

}  // namespace

ProjectionJacobian projection_jacobian(const CameraIntrinsics& intr, const Pose& pose,
                                       const ScenePoint& point) {
  const Vec3 pc = pose.apply(point);
  if (!(pc.z() > kMinDepth))
    raise(ErrorCode::NonPositiveDepth, "jacobian undefined at non-positive depth");

  const double inv_z = 1.0 / pc.z();
  Eigen::Matrix<double, 2, 3> d_pix;  // d(pixel)/d(camera-frame point)
  d_pix << intr.fx * inv_z, 0.0, -intr.fx * pc.x() * inv_z * inv_z, 0.0, intr.fy * inv_z,
      -intr.fy * pc.y() * inv_z * inv_z;

  ProjectionJacobian jac;
  // Left-multiplicative increment: d(Exp(w) R x)/dw = -[R x]^ = -[pc - t]^.
  jac.pose.leftCols<3>() = d_pix * (-skew(pc - pose.translation));
  jac.pose.rightCols<3>() = d_pix;
  jac.point = d_pix * pose.matrix();
  return jac;
}

Pose retract_pose(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta) {
  Pose out;
  const Vec3 w = delta.head<3>();
  const double angle = w.norm();
  Quat inc = Quat::Identity();
  if (angle > 1e-300) inc = Quat(Eigen::AngleAxisd(angle, w / angle));
  out.rotation = (inc * pose.rotation).normalized();
  out.translation = pose.translation + delta.tail<3>();
  return out;
}

}  // namespace mscalib
