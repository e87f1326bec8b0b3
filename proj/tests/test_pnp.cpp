#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mscalib/error.hpp"
#include "mscalib/geometry.hpp"
#include "mscalib/pnp.hpp"
#include "mscalib/rng.hpp"
#include "test_support.hpp"

using namespace mscalib;
using namespace mscalib::testing;

namespace {

struct ResectionCase {
  Pose pose;
  std::vector<ScenePoint> points3d;
  std::vector<PixelPoint> points2d;
};

ResectionCase make_case(Rng& rng, int n, bool coplanar) {
  ResectionCase out;
  out.pose = look_at(Vec3(2.0, 1.0, 2.5), Vec3::Zero());
  const auto& intr = default_intrinsics();
  while (static_cast<int>(out.points3d.size()) < n) {
    ScenePoint x(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                 coplanar ? 0.0 : rng.uniform(0.0, 1.5));
    if (depth_in_camera(out.pose, x) < 0.5) continue;
    const PixelPoint px = project(intr, out.pose, x);
    if (!intr.contains(px)) continue;
    out.points3d.push_back(x);
    out.points2d.push_back(px);
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("pnp");

TEST_CASE("noise-free resection recovers the pose in general position") {
  Rng rng(101);
  const auto data = make_case(rng, 50, false);
  const auto result =
      solve_pnp_ransac(data.points3d, data.points2d, default_intrinsics(), 7);

  CHECK(result.inlier_count == 50);
  CHECK(rotation_angle(result.pose.rotation, data.pose.rotation) < 1e-6);
  CHECK((result.pose.translation - data.pose.translation).norm() < 1e-7);
}

TEST_CASE("noise-free resection recovers the pose for coplanar points") {
  // The 12-parameter DLT is rank deficient here; the planar extraction must
  // take over.
  Rng rng(103);
  const auto data = make_case(rng, 50, true);
  const auto result =
      solve_pnp_ransac(data.points3d, data.points2d, default_intrinsics(), 7);

  CHECK(result.inlier_count == 50);
  CHECK(rotation_angle(result.pose.rotation, data.pose.rotation) < 1e-6);
  CHECK((result.pose.translation - data.pose.translation).norm() < 1e-7);
}

TEST_CASE("planted outliers are excluded at the 3 px threshold") {
  Rng rng(107);
  auto data = make_case(rng, 50, false);
  std::vector<bool> planted(50, false);
  for (int i = 0; i < 50; i += 5) {  // 20%
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double radius = rng.uniform(15.0, 300.0);
    data.points2d[i] += radius * PixelPoint(std::cos(angle), std::sin(angle));
    planted[i] = true;
  }

  const auto result =
      solve_pnp_ransac(data.points3d, data.points2d, default_intrinsics(), 7);
  for (int i = 0; i < 50; ++i) {
    if (planted[i])
      CHECK(result.inlier_mask[i] == 0);
    else
      CHECK(result.inlier_mask[i] == 1);
  }
}

TEST_CASE("five correspondences are rejected") {
  Rng rng(109);
  const auto data = make_case(rng, 5, false);
  try {
    solve_pnp_ransac(data.points3d, data.points2d, default_intrinsics(), 7);
    FAIL("expected InsufficientMatches");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientMatches);
  }
}

TEST_CASE("resection is reproducible for a fixed seed") {
  Rng rng(113);
  auto data = make_case(rng, 60, true);
  for (int i = 0; i < 60; i += 6) data.points2d[i] += PixelPoint(40.0, -25.0);

  const auto a = solve_pnp_ransac(data.points3d, data.points2d, default_intrinsics(), 99);
  const auto b = solve_pnp_ransac(data.points3d, data.points2d, default_intrinsics(), 99);
  CHECK(a.inlier_mask == b.inlier_mask);
  CHECK((a.pose.translation - b.pose.translation).norm() == 0.0);
  CHECK(a.pose.rotation.coeffs() == b.pose.rotation.coeffs());
}

TEST_SUITE_END();
