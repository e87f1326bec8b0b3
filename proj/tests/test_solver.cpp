#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "mscalib/bundle.hpp"
#include "mscalib/error.hpp"
#include "mscalib/eval.hpp"
#include "mscalib/geometry.hpp"
#include "mscalib/rng.hpp"
#include "mscalib/solver.hpp"
#include "test_support.hpp"

using namespace mscalib;
using namespace mscalib::testing;

namespace {

// Observations of the ground-truth scene restricted to the named cameras.
ObservationSet restrict_cameras(const ObservationSet& all, const std::set<int>& cameras) {
  ObservationSet out;
  for (const auto& obs : all.entries())
    if (cameras.count(obs.camera_id)) out.add(obs);
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("solver");

TEST_CASE("view score counts occupied pyramid cells") {
  CHECK(compute_view_score({}, 1920, 1080) == 0);

  const std::vector<PixelPoint> one = {PixelPoint(123.0, 456.0)};
  CHECK(compute_view_score(one, 1920, 1080) == 2 + 4 + 8);

  // Four points in the four image quadrants, far enough apart to occupy
  // distinct cells at every level.
  const std::vector<PixelPoint> four = {PixelPoint(100, 100), PixelPoint(1800, 100),
                                        PixelPoint(100, 1000), PixelPoint(1800, 1000)};
  CHECK(compute_view_score(four, 1920, 1080) == 4 * (2 + 4 + 8));
}

TEST_CASE("view score equals a direct cell recount") {
  Rng rng(61);
  std::vector<PixelPoint> pixels;
  for (int i = 0; i < 1000; ++i)
    pixels.emplace_back(rng.uniform(0.0, 1920.0), rng.uniform(0.0, 1080.0));

  int expected = 0;
  for (int level = 1; level <= 3; ++level) {
    const int cells = 1 << level;
    std::set<std::pair<int, int>> occupied;
    for (const auto& px : pixels) {
      const int ix = std::min(static_cast<int>(px.x() * cells / 1920.0), cells - 1);
      const int iy = std::min(static_cast<int>(px.y() * cells / 1080.0), cells - 1);
      occupied.insert({ix, iy});
    }
    expected += static_cast<int>(occupied.size()) * cells;
  }
  CHECK(compute_view_score(pixels, 1920, 1080) == expected);
}

TEST_CASE("the well-spread pair beats the clustered pair") {
  const ScenarioConfig config = small_grid_config(50);
  const SyntheticScene scene = make_scene(config);

  // Cameras 0 and 1 share the whole floor grid; camera 2 shares only a tight
  // cluster with camera 0 (plus the grid corner with camera 1 to stay a valid
  // pair).
  ObservationSet obs;
  int cluster = 0;
  for (const auto& o : scene.observations.entries()) {
    if (o.camera_id == 0 || o.camera_id == 1) obs.add(o);
  }
  const auto& cam2 = scene.rig.at(2);
  for (const auto& o : scene.observations.entries()) {
    if (o.camera_id != 0) continue;
    const ScenePoint& x = scene.points.positions[o.point_id];
    if (x.head<2>().norm() > 0.6) continue;  // central cluster only
    if (depth_in_camera(cam2.pose, x) <= 0.0) continue;
    const PixelPoint px = project(cam2.intrinsics, cam2.pose, x);
    if (!cam2.intrinsics.contains(px)) continue;
    obs.add({2, o.point_id, px, 1.0});
    ++cluster;
  }
  REQUIRE(cluster >= 60);

  IntrinsicsMap intrinsics;
  for (int id : {0, 1, 2}) intrinsics[id] = scene.rig.at(id).intrinsics;
  const CorrespondenceGraph graph(obs, intrinsics);

  SolverOptions options;
  const auto pair = select_initial_pair(graph, options);
  CHECK(pair.first == 0);
  CHECK(pair.second == 1);
}

TEST_CASE("a single camera has no valid pair") {
  const ScenarioConfig config = small_grid_config(51);
  const SyntheticScene scene = make_scene(config);
  const auto obs = restrict_cameras(scene.observations, {0});
  IntrinsicsMap intrinsics;
  intrinsics[0] = scene.rig.at(0).intrinsics;
  const CorrespondenceGraph graph(obs, intrinsics);
  try {
    select_initial_pair(graph, SolverOptions{});
    FAIL("expected NoValidPair");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoValidPair);
  }
}

TEST_CASE("ties fall back to the lowest camera ids") {
  // Three cameras with literally identical observations: every pair ties on
  // score and shared count.
  ObservationSet obs;
  Rng rng(52);
  std::vector<PixelPoint> pixels;
  for (int k = 0; k < 60; ++k)
    pixels.emplace_back(rng.uniform(100.0, 1800.0), rng.uniform(100.0, 1000.0));
  for (int cam = 0; cam < 3; ++cam)
    for (int k = 0; k < 60; ++k) obs.add({cam, k, pixels[k], 1.0});

  IntrinsicsMap intrinsics;
  for (int cam = 0; cam < 3; ++cam) intrinsics[cam] = default_intrinsics();
  const CorrespondenceGraph graph(obs, intrinsics);
  const auto pair = select_initial_pair(graph, SolverOptions{});
  CHECK(pair.first == 0);
  CHECK(pair.second == 1);
}

TEST_CASE("pair initialization recovers the relative geometry exactly at zero noise") {
  const ScenarioConfig config = small_grid_config(53);
  const SyntheticScene scene = make_scene(config);
  const auto obs = restrict_cameras(scene.observations, {0, 1});
  IntrinsicsMap intrinsics;
  for (int id : {0, 1}) intrinsics[id] = scene.rig.at(id).intrinsics;
  const CorrespondenceGraph graph(obs, intrinsics);

  SolverOptions options;
  options.seed = 5;
  const Reconstruction recon = initialize_pair(graph, {0, 1}, options);
  REQUIRE(recon.cameras.at(0).registered);
  REQUIRE(recon.cameras.at(1).registered);

  // Compare against the ground-truth relative motion up to the scale gauge.
  const Pose gt_rel = scene.rig.at(1).pose * scene.rig.at(0).pose.inverse();
  const Pose est_rel = recon.cameras.at(1).pose * recon.cameras.at(0).pose.inverse();
  CHECK(rotation_angle(est_rel.rotation, gt_rel.rotation) < 1e-6);
  CHECK(angle_between(est_rel.translation, gt_rel.translation) < 1e-6);
  CHECK(std::abs(est_rel.translation.norm() - 1.0) < 1e-12);

  // Triangulated points match the ground truth up to the same scale.
  const double scale = 1.0 / gt_rel.translation.norm();
  double worst = 0.0;
  for (const auto& [id, x] : recon.points) {
    const Vec3 gt_in_cam0 = scene.rig.at(0).pose.apply(scene.points.positions[id]);
    const Vec3 est_in_cam0 = recon.cameras.at(0).pose.apply(x);
    worst = std::max(worst, (est_in_cam0 - scale * gt_in_cam0).norm());
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("pair initialization survives 30% outliers") {
  const ScenarioConfig config = small_grid_config(54);
  const SyntheticScene scene = make_scene(config);
  ObservationSet obs;
  Rng rng(55);
  int planted_inliers = 0;
  for (const auto& o : scene.observations.entries()) {
    if (o.camera_id > 1) continue;
    Observation copy = o;
    if (o.camera_id == 1 && rng.uniform() < 0.3) {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      copy.pixel += rng.uniform(20.0, 400.0) * PixelPoint(std::cos(angle), std::sin(angle));
    } else if (o.camera_id == 1) {
      ++planted_inliers;
    }
    obs.add(copy);
  }

  IntrinsicsMap intrinsics;
  for (int id : {0, 1}) intrinsics[id] = scene.rig.at(id).intrinsics;
  const CorrespondenceGraph graph(obs, intrinsics);
  SolverOptions options;
  options.seed = 5;
  const Reconstruction recon = initialize_pair(graph, {0, 1}, options);
  CHECK(static_cast<int>(recon.points.size()) >=
        static_cast<int>(0.95 * planted_inliers));
}

TEST_CASE("collinear correspondences cannot initialize a pair") {
  // All points along one floor line.
  ScenarioConfig config = small_grid_config(56);
  config.grid_rows = 1;
  config.grid_cols = 100;
  const SyntheticScene scene = make_scene(config);
  const auto obs = restrict_cameras(scene.observations, {0, 1});
  IntrinsicsMap intrinsics;
  for (int id : {0, 1}) intrinsics[id] = scene.rig.at(id).intrinsics;
  const CorrespondenceGraph graph(obs, intrinsics);
  try {
    initialize_pair(graph, {0, 1}, SolverOptions{});
    FAIL("expected InitializationFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InitializationFailed);
  }
}

TEST_CASE("the next camera is registered against the triangulated points") {
  const ScenarioConfig config = small_grid_config(57);
  const SyntheticScene scene = make_scene(config);
  const auto obs = restrict_cameras(scene.observations, {0, 1, 2});
  IntrinsicsMap intrinsics;
  for (int id : {0, 1, 2}) intrinsics[id] = scene.rig.at(id).intrinsics;
  const CorrespondenceGraph graph(obs, intrinsics);

  SolverOptions options;
  options.seed = 5;
  Reconstruction recon = initialize_pair(graph, {0, 1}, options);
  const int registered = register_next_camera(recon, graph, options);
  CHECK(registered == 2);

  const Pose gt_rel = scene.rig.at(2).pose * scene.rig.at(0).pose.inverse();
  const Pose est_rel = recon.cameras.at(2).pose * recon.cameras.at(0).pose.inverse();
  CHECK(rotation_angle(est_rel.rotation, gt_rel.rotation) < 1e-6);
}

TEST_CASE("a camera without usable correspondences cannot be registered") {
  const ScenarioConfig config = small_grid_config(58);
  const SyntheticScene scene = make_scene(config);
  const auto obs = restrict_cameras(scene.observations, {0, 1});
  IntrinsicsMap intrinsics;
  for (int id : {0, 1, 2}) intrinsics[id] = scene.rig.at(id).intrinsics;  // 2 has no obs
  const CorrespondenceGraph graph(obs, intrinsics);

  SolverOptions options;
  options.seed = 5;
  Reconstruction recon = initialize_pair(graph, {0, 1}, options);
  try {
    register_next_camera(recon, graph, options);
    FAIL("expected NoRegistrableCamera");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoRegistrableCamera);
  }
}

TEST_CASE("the better-covered candidate is registered first") {
  const ScenarioConfig config = small_grid_config(59);
  const SyntheticScene scene = make_scene(config);

  // Camera 2 keeps its full spread; camera 3 is reduced to a tight cluster.
  ObservationSet obs;
  for (const auto& o : scene.observations.entries()) {
    if (o.camera_id <= 2) {
      obs.add(o);
    } else if (o.camera_id == 3) {
      const ScenePoint& x = scene.points.positions[o.point_id];
      if (x.head<2>().norm() < 0.2) obs.add(o);
    }
  }
  IntrinsicsMap intrinsics;
  for (int id : {0, 1, 2, 3}) intrinsics[id] = scene.rig.at(id).intrinsics;
  const CorrespondenceGraph graph(obs, intrinsics);

  SolverOptions options;
  options.seed = 5;
  Reconstruction recon = initialize_pair(graph, {0, 1}, options);
  CHECK(register_next_camera(recon, graph, options) == 2);
}

TEST_CASE("track triangulation is exact at zero noise") {
  const ScenarioConfig config = small_grid_config(60);
  const SyntheticScene scene = make_scene(config);
  const CorrespondenceGraph graph(scene.observations, intrinsics_of(scene.rig));

  Reconstruction recon;
  for (const auto& cam : scene.rig.cameras) {
    CameraSolution sol;
    sol.registered = true;
    sol.pose = cam.pose;
    recon.cameras[cam.id] = sol;
  }
  recon.initial_pair = {0, 1};

  SolverOptions options;
  const int added = triangulate_tracks(recon, graph, options);
  CHECK(added == static_cast<int>(graph.tracks().size()));

  refresh_residuals(recon, graph);
  double worst_reproj = 0.0;
  for (const auto& r : recon.residuals)
    worst_reproj = std::max(worst_reproj, r.residual.norm());
  CHECK(worst_reproj < 1e-9);

  double worst_point = 0.0;
  for (const auto& [id, x] : recon.points)
    worst_point = std::max(worst_point, (x - scene.points.positions[id]).norm());
  CHECK(worst_point < 1e-9);
}

TEST_CASE("single-observation tracks are not triangulated") {
  ObservationSet obs;
  Rng rng(62);
  for (int k = 0; k < 80; ++k) {
    obs.add({0, k, PixelPoint(rng.uniform(100.0, 1800.0), rng.uniform(100.0, 1000.0)), 1.0});
    obs.add({1, k, PixelPoint(rng.uniform(100.0, 1800.0), rng.uniform(100.0, 1000.0)), 1.0});
  }
  obs.add({0, 1000, PixelPoint(500.0, 500.0), 1.0});  // lone observation

  IntrinsicsMap intrinsics;
  for (int id : {0, 1}) intrinsics[id] = default_intrinsics();
  const CorrespondenceGraph graph(obs, intrinsics);
  CHECK(graph.tracks().count(1000) == 0);
}

TEST_CASE("full calibration at sigma 0.3 reaches the noise floor") {
  const ScenarioConfig config = small_grid_config(63, 0.3);
  const SyntheticScene scene = make_scene(config);
  SolverOptions options;
  options.seed = 7;
  const Reconstruction recon =
      calibrate(scene.observations, intrinsics_of(scene.rig), options);

  CHECK(recon.registered_count() == 10);
  const double rms = std::sqrt(recon.final_mean_squared_cost / 2.0);
  CHECK(rms > 0.2);
  CHECK(rms < 0.4);

  std::map<int, Pose> truth;
  for (const auto& [id, pose] : recon.registered_poses()) truth[id] = scene.rig.at(id).pose;
  const auto estimated = recon.registered_poses();
  const auto alignment = align_camera_centers(estimated, truth);
  const auto errors = pose_errors(estimated, truth, alignment);
  CHECK(errors.rotation_rmse_deg < 0.1);
}

TEST_CASE("a two-camera scene reduces to the pair initialization") {
  const ScenarioConfig config = small_grid_config(64);
  const SyntheticScene scene = make_scene(config);
  const auto obs = restrict_cameras(scene.observations, {0, 1});
  IntrinsicsMap intrinsics;
  for (int id : {0, 1}) intrinsics[id] = scene.rig.at(id).intrinsics;

  SolverOptions options;
  options.seed = 11;
  const Reconstruction full = calibrate(obs, intrinsics, options);
  const Reconstruction pair = initialize_pair(CorrespondenceGraph(obs, intrinsics),
                                              {0, 1}, options);

  CHECK(full.registered_count() == 2);
  CHECK(rotation_angle(full.cameras.at(1).pose.rotation, pair.cameras.at(1).pose.rotation) <
        1e-9);
  CHECK((full.cameras.at(1).pose.translation - pair.cameras.at(1).pose.translation).norm() <
        1e-9);
}

TEST_CASE("cameras without observations are returned unregistered") {
  const ScenarioConfig config = small_grid_config(65);
  const SyntheticScene scene = make_scene(config);
  auto intrinsics = intrinsics_of(scene.rig);
  intrinsics[99] = default_intrinsics();  // never observes anything

  SolverOptions options;
  options.seed = 13;
  const Reconstruction recon = calibrate(scene.observations, intrinsics, options);
  CHECK(recon.registered_count() == 10);
  REQUIRE(recon.cameras.count(99) == 1);
  CHECK(recon.cameras.at(99).registered == false);
}

TEST_CASE("calibration is bit-reproducible for a fixed seed") {
  const ScenarioConfig config = small_grid_config(66, 0.3);
  const SyntheticScene scene = make_scene(config);
  SolverOptions options;
  options.seed = 17;
  const Reconstruction a = calibrate(scene.observations, intrinsics_of(scene.rig), options);
  const Reconstruction b = calibrate(scene.observations, intrinsics_of(scene.rig), options);

  for (const auto& [id, cam] : a.cameras) {
    CHECK(cam.registered == b.cameras.at(id).registered);
    if (!cam.registered) continue;
    CHECK((cam.pose.translation - b.cameras.at(id).pose.translation).norm() == 0.0);
    CHECK(cam.pose.rotation.coeffs() == b.cameras.at(id).pose.rotation.coeffs());
  }
  for (const auto& [id, x] : a.points) CHECK((x - b.points.at(id)).norm() == 0.0);
}

TEST_CASE("residuals stored on the reconstruction match a recomputation") {
  const ScenarioConfig config = small_grid_config(67, 0.2);
  const SyntheticScene scene = make_scene(config);
  SolverOptions options;
  options.seed = 19;
  const Reconstruction recon =
      calibrate(scene.observations, intrinsics_of(scene.rig), options);

  const auto intrinsics = intrinsics_of(scene.rig);
  const auto tracks = scene.observations.tracks();
  for (const auto& r : recon.residuals) {
    const auto& cam = recon.cameras.at(r.camera_id);
    const auto& track = tracks.at(r.point_id);
    PixelPoint measured = PixelPoint::Zero();
    for (const auto& obs : track)
      if (obs.camera_id == r.camera_id) measured = obs.pixel;
    const Vec3 pc = cam.pose.apply(recon.points.at(r.point_id));
    const auto& intr = intrinsics.at(r.camera_id);
    const Vec2 expected(intr.fx * pc.x() / pc.z() + intr.cx - measured.x(),
                        intr.fy * pc.y() / pc.z() + intr.cy - measured.y());
    CHECK((r.residual - expected).norm() < 1e-9);
  }
}

TEST_CASE("coplanar calibration recovers the ground truth at zero noise") {
  const ScenarioConfig config = small_grid_config(68);
  const SyntheticScene scene = make_scene(config);
  SolverOptions options;
  options.seed = 23;
  options.coplanarity = true;
  const Reconstruction recon =
      calibrate(scene.observations, intrinsics_of(scene.rig), options);

  CHECK(recon.registered_count() == 10);
  std::map<int, Pose> truth;
  for (const auto& [id, pose] : recon.registered_poses()) truth[id] = scene.rig.at(id).pose;
  const auto estimated = recon.registered_poses();
  const auto alignment = align_camera_centers(estimated, truth);
  const auto errors = pose_errors(estimated, truth, alignment);
  CHECK(errors.rotation_rmse_deg * std::numbers::pi / 180.0 < 1e-6);
  CHECK(errors.translation_rmse < 1e-6 * 2.8);

  REQUIRE(recon.has_plane);
  for (const auto& [id, x] : recon.points)
    CHECK(std::abs(recon.plane.normal.dot(x - recon.plane.origin)) < 1e-9);
}

TEST_SUITE_END();
