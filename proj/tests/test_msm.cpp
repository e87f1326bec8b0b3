#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mscalib/detections.hpp"
#include "mscalib/error.hpp"
#include "mscalib/msm.hpp"
#include "mscalib/rng.hpp"
#include "mscalib/schedule.hpp"
#include "test_support.hpp"

using namespace mscalib;
using namespace mscalib::testing;

TEST_SUITE_BEGIN("msm");

TEST_CASE("seven default scales stay centered on the marker point") {
  const Vec2 p(960.0, 540.0);
  PatternSpec pattern;
  pattern.side_px = 24.0;
  const auto def = build_msm_definition(p, pattern, ScaleSet::defaults(), 1920, 1080);

  CHECK(def.placements.size() == 7);
  for (const auto& placement : def.placements) {
    const Vec2 center = center_from_square_corners(placement.corners);
    CHECK((center - p).norm() < 1e-9);
  }
}

TEST_CASE("unit scale reproduces the unscaled pattern") {
  const Vec2 p(500.0, 400.0);
  PatternSpec pattern;
  pattern.side_px = 30.0;
  const auto def = build_msm_definition(p, pattern, ScaleSet::single(), 1920, 1080);
  const auto expected = square_corners(p, 30.0);
  for (int i = 0; i < 4; ++i) CHECK((def.placements[0].corners[i] - expected[i]).norm() == 0.0);
}

TEST_CASE("a large scale near the corner leaves the projector image") {
  PatternSpec pattern;
  pattern.side_px = 24.0;
  try {
    build_msm_definition(Vec2(50.0, 50.0), pattern, ScaleSet::defaults(), 1920, 1080);
    FAIL("expected OutOfBounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfBounds);
  }
}

TEST_CASE("center of the unit square") {
  const std::array<PixelPoint, 4> corners = {PixelPoint(0, 0), PixelPoint(1, 0), PixelPoint(1, 1),
                                             PixelPoint(0, 1)};
  const PixelPoint c = center_from_square_corners(corners);
  CHECK((c - PixelPoint(0.5, 0.5)).norm() < 1e-12);
}

TEST_CASE("the diagonal intersection is a projective invariant") {
  Rng rng(21);
  const std::array<PixelPoint, 4> corners = {PixelPoint(-1, -1), PixelPoint(1, -1),
                                             PixelPoint(1, 1), PixelPoint(-1, 1)};
  const Vec2 center(0.0, 0.0);

  int checked = 0;
  while (checked < 1000) {
    Mat3 g;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) g(r, c) = rng.uniform(-1.0, 1.0);
    g(2, 2) = rng.uniform(2.0, 4.0);  // keep the quad finite and convex-ish
    if (std::abs(g.determinant()) < 1e-3) continue;
    const Homography h{g};

    std::array<PixelPoint, 4> warped;
    bool finite = true;
    for (int i = 0; i < 4; ++i) {
      const Vec3 q = g * Vec3(corners[i].x(), corners[i].y(), 1.0);
      if (std::abs(q.z()) < 1e-3) {
        finite = false;
        break;
      }
      warped[i] = q.hnormalized();
    }
    if (!finite) continue;

    PixelPoint mapped_center;
    try {
      mapped_center = center_from_square_corners(warped);
    } catch (const Error&) {
      continue;  // the random homography degenerated the quad
    }
    CHECK((mapped_center - h.apply(center)).norm() < 1e-9);
    ++checked;
  }
}

TEST_CASE("collinear corners are rejected") {
  const std::array<PixelPoint, 4> corners = {PixelPoint(0, 0), PixelPoint(1, 0), PixelPoint(2, 0),
                                             PixelPoint(0, 1)};
  try {
    center_from_square_corners(corners);
    FAIL("expected DegenerateQuad");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateQuad);
  }
}

TEST_CASE("the full-size schedule covers 3200 centers in 700 steps") {
  const GridSpec grid = grid_for_projector(50, 64, 1920, 1080, 100.0);
  const auto schedule = generate_schedule(grid, 100, 32, ScaleSet::defaults(), 24.0, 1920, 1080);

  CHECK(schedule.steps.size() == 700);
  CHECK(schedule.markers.size() == 3200);
  CHECK(schedule.total_duration_ms() == doctest::Approx(70000.0));

  // Each marker belongs to exactly one array, and every node is used once.
  std::set<std::pair<int, int>> pairs;
  std::set<int> seen;
  for (const auto& step : schedule.steps) {
    for (int id : step.marker_ids) {
      pairs.insert({step.array_id, id});
      seen.insert(id);
    }
  }
  CHECK(pairs.size() == 3200);
  CHECK(seen.size() == 3200);
}

TEST_CASE("schedule centers enumerate the lattice exactly") {
  const GridSpec grid = grid_for_projector(5, 8, 1920, 1080, 100.0);
  const auto schedule = generate_schedule(grid, 8, 5, ScaleSet::single(), 24.0, 1920, 1080);

  std::vector<std::pair<double, double>> centers;
  for (const auto& marker : schedule.markers)
    centers.emplace_back(marker.center.x(), marker.center.y());
  std::sort(centers.begin(), centers.end());

  std::vector<std::pair<double, double>> lattice;
  for (int i = 0; i < grid.node_count(); ++i) {
    const Vec2 node = grid.node(i);
    lattice.emplace_back(node.x(), node.y());
  }
  std::sort(lattice.begin(), lattice.end());
  CHECK(centers == lattice);

  // Successive arrays are the previous one offset by one grid stride.
  for (int a = 0; a + 1 < schedule.arrays; ++a) {
    const auto& curr = schedule.steps[a * 1].marker_ids;
    const auto& next = schedule.steps[(a + 1) * 1].marker_ids;
    for (std::size_t j = 0; j < curr.size(); ++j) CHECK(next[j] == curr[j] + 1);
  }
}

TEST_CASE("a one-marker schedule has a single step at the grid node") {
  GridSpec grid;
  grid.rows = grid.cols = 1;
  grid.x0 = grid.y0 = 200.0;
  grid.x1 = grid.y1 = 900.0;
  const auto schedule = generate_schedule(grid, 1, 1, ScaleSet::single(), 24.0, 1920, 1080);
  CHECK(schedule.steps.size() == 1);
  CHECK(schedule.markers.size() == 1);
  CHECK((schedule.markers[0].center - Vec2(550.0, 550.0)).norm() < 1e-12);
}

TEST_CASE("inconsistent array shape is rejected") {
  const GridSpec grid = grid_for_projector(5, 8, 1920, 1080, 100.0);
  try {
    generate_schedule(grid, 7, 5, ScaleSet::single(), 24.0, 1920, 1080);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

namespace {

ProjectionSchedule tiny_schedule() {
  const GridSpec grid = grid_for_projector(2, 2, 1920, 1080, 200.0);
  return generate_schedule(grid, 1, 4, ScaleSet{{1.0, 2.0, 3.0}}, 24.0, 1920, 1080);
}

}  // namespace

TEST_CASE("fusion takes the component-wise median of consistent detections") {
  const auto schedule = tiny_schedule();
  std::vector<RawDetection> detections;
  const std::array<Vec2, 3> centers = {Vec2(100.0, 100.0), Vec2(100.1, 99.9),
                                       Vec2(100.05, 100.05)};
  for (int s = 0; s < 3; ++s) {
    RawDetection det;
    det.camera_id = 0;
    det.step_id = s;
    det.marker_id = 0;
    det.scale_index = s;
    det.center = centers[s];
    detections.push_back(det);
  }
  const auto obs = fuse_detections(detections, schedule);
  REQUIRE(obs.size() == 1);
  CHECK((obs.entries()[0].pixel - Vec2(100.05, 100.0)).norm() < 1e-12);
}

TEST_CASE("fusion drops detections far from the median") {
  const auto schedule = tiny_schedule();
  std::vector<RawDetection> detections;
  const std::array<Vec2, 3> centers = {Vec2(100.0, 100.0), Vec2(100.0, 100.0),
                                       Vec2(180.0, 40.0)};
  for (int s = 0; s < 3; ++s) {
    RawDetection det;
    det.camera_id = 2;
    det.step_id = s;
    det.marker_id = 1;
    det.scale_index = s;
    det.center = centers[s];
    detections.push_back(det);
  }
  const auto obs = fuse_detections(detections, schedule);
  REQUIRE(obs.size() == 1);
  CHECK((obs.entries()[0].pixel - Vec2(100.0, 100.0)).norm() < 1e-12);
}

TEST_CASE("fusing a single detection returns it exactly") {
  const auto schedule = tiny_schedule();
  RawDetection det;
  det.camera_id = 1;
  det.step_id = 2;
  det.marker_id = 3;
  det.scale_index = 2;
  det.center = Vec2(433.25, 817.5);
  const auto obs = fuse_detections(std::vector<RawDetection>{det}, schedule);
  REQUIRE(obs.size() == 1);
  CHECK(obs.entries()[0].pixel.x() == 433.25);
  CHECK(obs.entries()[0].pixel.y() == 817.5);
}

TEST_CASE("corner quads are reduced to their projective centers") {
  const auto schedule = tiny_schedule();
  RawDetection det;
  det.camera_id = 0;
  det.step_id = 0;
  det.marker_id = 0;
  det.scale_index = 0;
  det.corners = std::array<PixelPoint, 4>{PixelPoint(10, 10), PixelPoint(30, 12),
                                          PixelPoint(28, 30), PixelPoint(8, 28)};
  const auto expected = center_from_square_corners(*det.corners);
  const auto obs = fuse_detections(std::vector<RawDetection>{det}, schedule);
  REQUIRE(obs.size() == 1);
  CHECK((obs.entries()[0].pixel - expected).norm() == 0.0);
}

TEST_CASE("unknown steps are rejected") {
  const auto schedule = tiny_schedule();
  RawDetection det;
  det.camera_id = 0;
  det.step_id = 99;
  det.marker_id = 0;
  det.center = Vec2(1.0, 1.0);
  try {
    fuse_detections(std::vector<RawDetection>{det}, schedule);
    FAIL("expected UnknownStep");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownStep);
  }
}

TEST_CASE("fused per-scale detections agree with the exact center at sigma/sqrt(n)") {
  const auto schedule = tiny_schedule();
  const Vec2 exact(612.4, 505.8);
  const double sigma = 0.3;
  Rng rng(57);

  double worst = 0.0;
  const int runs = 200;
  for (int run = 0; run < runs; ++run) {
    std::vector<RawDetection> detections;
    for (int s = 0; s < 3; ++s) {
      RawDetection det;
      det.camera_id = 0;
      det.step_id = s;
      det.marker_id = 2;
      det.scale_index = s;
      det.center = exact + sigma * Vec2(rng.gaussian(), rng.gaussian());
      detections.push_back(det);
    }
    const auto obs = fuse_detections(detections, schedule);
    REQUIRE(obs.size() == 1);
    worst = std::max(worst, (obs.entries()[0].pixel - exact).norm());
  }
  // The median of 3 per-axis has std ~ sigma/sqrt(3) up to a small factor.
  CHECK(worst < 6.0 * sigma / std::sqrt(3.0));
}

TEST_SUITE_END();
