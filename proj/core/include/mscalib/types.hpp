#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <map>
#include <vector>

namespace mscalib {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Quat = Eigen::Quaterniond;

// Pixel coordinates (u, v), intrinsics-normalized image coordinates, and
// 3D scene coordinates. Plain Eigen vectors; the aliases carry the intent.
using PixelPoint = Vec2;
using NormalizedPoint = Vec2;
using ScenePoint = Vec3;

// Pinhole intrinsics, no distortion. All pixel inputs to the library are
// expected to be undistorted beforehand.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Mat3 matrix() const;
  double mean_focal() const { return 0.5 * (fx + fy); }
  NormalizedPoint normalize(const PixelPoint& px) const {
    return {(px.x() - cx) / fx, (px.y() - cy) / fy};
  }
  PixelPoint denormalize(const NormalizedPoint& xn) const {
    return {fx * xn.x() + cx, fy * xn.y() + cy};
  }
  bool contains(const PixelPoint& px) const {
    return px.x() >= 0.0 && px.x() < width && px.y() >= 0.0 && px.y() < height;
  }
  // Throws InvalidArgument unless fx, fy > 0 and the principal point is
  // strictly inside the image.
  void validate() const;
};

// World-to-camera rigid transform: x_cam = R * x_world + t.
struct Pose {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  Mat3 matrix() const { return rotation.toRotationMatrix(); }
  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  Vec3 center() const { return rotation.conjugate() * (-translation); }
  Pose inverse() const;
  // Composition: (a * b).apply(x) == a.apply(b.apply(x)).
  friend Pose operator*(const Pose& a, const Pose& b);
  void normalize() { rotation.normalize(); }

  static Pose identity() { return {}; }
  static Pose from_matrix(const Mat3& r, const Vec3& t);
};

// Geodesic angle between two rotations, radians.
double rotation_angle(const Quat& a, const Quat& b);

struct Camera {
  int id = 0;
  CameraIntrinsics intrinsics;
  Pose pose;
};

struct CameraRig {
  std::vector<Camera> cameras;  // kept sorted by id

  const Camera* find(int id) const;
  const Camera& at(int id) const;  // throws IdMismatch
  void add(const Camera& camera);  // throws InvalidArgument on duplicate id
  std::size_t size() const { return cameras.size(); }
};

using IntrinsicsMap = std::map<int, CameraIntrinsics>;

IntrinsicsMap intrinsics_of(const CameraRig& rig);

// 3x3 projective map between planes, defined up to scale. Stored in the
// canonical representative: unit Frobenius norm, largest-magnitude entry
// positive.
struct Homography {
  Mat3 m = Mat3::Identity();

  static Homography canonical(const Mat3& h);  // throws DegenerateGeometry if det == 0
  Vec2 apply(const Vec2& p) const;
  Homography inverse() const;
};

// One fused image measurement of a scene point.
struct Observation {
  int camera_id = 0;
  int point_id = 0;
  PixelPoint pixel = PixelPoint::Zero();
  double weight = 1.0;
};

// Set of measurements with at most one entry per (camera, point) pair.
// A pair is "observed" iff an entry for it exists.
class ObservationSet {
 public:
  void add(const Observation& obs);  // throws InvalidArgument on duplicates or weight outside (0, 1]
  const std::vector<Observation>& entries() const { return entries_; }
  bool observed(int camera_id, int point_id) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // point id -> observations ordered by camera id. Every track has length >= 1.
  std::map<int, std::vector<Observation>> tracks() const;

 private:
  std::vector<Observation> entries_;
  std::map<std::pair<int, int>, std::size_t> index_;
};

}  // namespace mscalib
