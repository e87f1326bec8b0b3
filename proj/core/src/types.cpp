#include "mscalib/types.hpp"

#include <algorithm>
#include <cmath>

#include "mscalib/error.hpp"

namespace mscalib {

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    raise(ErrorCode::InvalidArgument, "focal lengths must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
    raise(ErrorCode::InvalidArgument, "principal point must lie inside the image");
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.conjugate();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose operator*(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose Pose::from_matrix(const Mat3& r, const Vec3& t) {
  Pose p;
  p.rotation = Quat(r).normalized();
  p.translation = t;
  return p;
}

double rotation_angle(const Quat& a, const Quat& b) {
  const double d = std::min(1.0, std::abs(a.dot(b)));
  return 2.0 * std::acos(d);
}

const Camera* CameraRig::find(int id) const {
  for (const auto& c : cameras)
    if (c.id == id) return &c;
  return nullptr;
}

const Camera& CameraRig::at(int id) const {
  const Camera* c = find(id);
  if (!c) raise(ErrorCode::IdMismatch, "no camera with id " + std::to_string(id));
  return *c;
}

void CameraRig::add(const Camera& camera) {
  if (find(camera.id))
    raise(ErrorCode::InvalidArgument, "duplicate camera id " + std::to_string(camera.id));
  cameras.push_back(camera);
  std::sort(cameras.begin(), cameras.end(),
            [](const Camera& a, const Camera& b) { return a.id < b.id; });
}

IntrinsicsMap intrinsics_of(const CameraRig& rig) {
  IntrinsicsMap out;
  for (const auto& c : rig.cameras) out[c.id] = c.intrinsics;
  return out;
}

Homography Homography::canonical(const Mat3& h) {
  const double det = h.determinant();
  if (det == 0.0 || !std::isfinite(det))
    raise(ErrorCode::DegenerateGeometry, "homography is singular");
  Mat3 m = h / h.norm();
  // Sign fixed by the largest-magnitude entry; row-major scan breaks ties.
  double best = 0.0;
  int best_r = 0, best_c = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (std::abs(m(r, c)) > best) {
        best = std::abs(m(r, c));
        best_r = r;
        best_c = c;
      }
  if (m(best_r, best_c) < 0.0) m = -m;
  return Homography{m};
}

Vec2 Homography::apply(const Vec2& p) const {
  const Vec3 q = m * Vec3(p.x(), p.y(), 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

Homography Homography::inverse() const { return Homography::canonical(m.inverse()); }

void ObservationSet::add(const Observation& obs) {
  if (!(obs.weight > 0.0 && obs.weight <= 1.0))
    raise(ErrorCode::InvalidArgument, "observation weight must be in (0, 1]");
  const auto key = std::make_pair(obs.camera_id, obs.point_id);
  if (index_.count(key))
    raise(ErrorCode::InvalidArgument,
          "duplicate observation for camera " + std::to_string(obs.camera_id) + ", point " +
              std::to_string(obs.point_id));
  index_[key] = entries_.size();
  entries_.push_back(obs);
}

bool ObservationSet::observed(int camera_id, int point_id) const {
  return index_.count(std::make_pair(camera_id, point_id)) > 0;
}

std::map<int, std::vector<Observation>> ObservationSet::tracks() const {
  std::map<int, std::vector<Observation>> out;
  for (const auto& obs : entries_) out[obs.point_id].push_back(obs);
  for (auto& [id, track] : out)
    std::sort(track.begin(), track.end(),
              [](const Observation& a, const Observation& b) { return a.camera_id < b.camera_id; });
  return out;
}

}  // namespace mscalib
