#pragma once

#include "mscalib/types.hpp"

namespace mscalib {

// Depth of a world point along the camera optical axis.
double depth_in_camera(const Pose& pose, const ScenePoint& point);

// Perspective pinhole projection. Throws NonPositiveDepth when the point is
// at or behind the camera plane (z_cam <= 1e-12).
PixelPoint project(const CameraIntrinsics& intr, const Pose& pose, const ScenePoint& point);

// Unit viewing ray through a pixel, expressed in world coordinates.
Vec3 backproject_ray(const CameraIntrinsics& intr, const Pose& pose, const PixelPoint& pixel);

// Euclidean reprojection error in pixels; +inf when the point has
// non-positive depth in the camera.
double reprojection_error_px(const CameraIntrinsics& intr, const Pose& pose,
                             const ScenePoint& point, const PixelPoint& observed);

// Homogeneous (DLT) two-view triangulation on intrinsics-normalized
// observations. Sign-agnostic: the result may lie behind either camera and
// callers apply their own cheirality filter. Throws DegenerateGeometry when
// the camera centers coincide or the linear system has no isolated solution
// (near-parallel rays).
ScenePoint triangulate_two_view_normalized(const Pose& pose_a, const Pose& pose_b,
                                           const NormalizedPoint& xa, const NormalizedPoint& xb);

// Same, taking pixel observations and intrinsics.
ScenePoint triangulate_two_view(const CameraIntrinsics& intr_a, const Pose& pose_a,
                                const CameraIntrinsics& intr_b, const Pose& pose_b,
                                const PixelPoint& xa, const PixelPoint& xb);

struct ProjectionJacobian {
  // Derivatives of the projected pixel wrt the pose tangent [rotation, translation]
  // (left-multiplicative rotation increment) and wrt the scene point.
  Eigen::Matrix<double, 2, 6> pose;
  Eigen::Matrix<double, 2, 3> point;
};

// Throws NonPositiveDepth: the projection is not differentiable there.
ProjectionJacobian projection_jacobian(const CameraIntrinsics& intr, const Pose& pose,
                                       const ScenePoint& point);

// Applies a 6-dof tangent step [rotation, translation]: R <- Exp(w) * R, t <- t + dt.
Pose retract_pose(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta);

}  // namespace mscalib
