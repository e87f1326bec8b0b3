#include "mscalib/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mscalib/error.hpp"
#include "mscalib/geometry.hpp"
#include "mscalib/rng.hpp"

namespace mscalib {

namespace {

constexpr int kMaxBoards = 10000;
constexpr int kMaxPlacementTries = 200000;

}  // namespace

const char* to_string(Scenario scenario) noexcept {
  switch (scenario) {
    case Scenario::BoardVolume: return "board_volume";
    case Scenario::BoardFloor: return "board_floor";
    case Scenario::GridFloor: return "grid_floor";
  }
  return "unknown";
}

Scenario scenario_from_string(std::string_view name) {
  if (name == "board_volume") return Scenario::BoardVolume;
  if (name == "board_floor") return Scenario::BoardFloor;
  if (name == "grid_floor") return Scenario::GridFloor;
  raise(ErrorCode::InvalidArgument, "unknown scenario '" + std::string(name) + "'");
}

void VisibilityModel::validate() const {
  if (!(min_diameter_px > 0.0) || !(max_diameter_px > min_diameter_px))
    raise(ErrorCode::InvalidArgument, "visibility window requires 0 < min < max");
  if (!(max_obliquity_deg > 0.0) || !(max_obliquity_deg <= 90.0))
    raise(ErrorCode::InvalidArgument, "max obliquity must lie in (0, 90] degrees");
}

ScenarioConfig::CameraClass ScenarioConfig::camera_class(int camera_id) const {
  if (camera_id < far_count) return CameraClass::Far;
  if (camera_id < far_count + near_count) return CameraClass::Near;
  return CameraClass::Closeup;
}

void ScenarioConfig::validate() const {
  if (far_count < 0 || near_count < 0 || camera_count() < 1)
    raise(ErrorCode::InvalidArgument, "camera counts must be non-negative and total >= 1");
  for (double v : {far_radius_m, far_height_m, near_radius_m, near_height_m, board_width_m,
                   board_height_m, volume_radius_m, volume_max_height_m, floor_radius_m,
                   grid_extent_x_m, grid_extent_y_m, marker_base_size_m, focal_px,
                   closeup_focal_px})
    if (!(v > 0.0)) raise(ErrorCode::InvalidArgument, "scene dimensions must be positive");
  if (board_cols < 2 || board_rows < 2)
    raise(ErrorCode::InvalidArgument, "board lattice needs >= 2x2 points");
  if (grid_cols < 1 || grid_rows < 1)
    raise(ErrorCode::InvalidArgument, "grid needs >= 1x1 points");
  if (target_obs_near < 1 || target_obs_far < 1)
    raise(ErrorCode::InvalidArgument, "observation targets must be positive");
  if (!(noise_sigma_px >= 0.0)) raise(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
  if (image_width < 2 || image_height < 2)
    raise(ErrorCode::InvalidArgument, "image size must be >= 2x2");
  marker_scales.validate();
}

Pose look_at(const Vec3& position, const Vec3& target, const Vec3& world_up) {
  const Vec3 forward = (target - position).normalized();
  Vec3 up_residual = world_up - world_up.dot(forward) * forward;
  if (up_residual.norm() < 1e-12) {
    const Vec3 alt = std::abs(forward.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX();
    up_residual = alt - alt.dot(forward) * forward;
  }
  // Image y points down, so the camera y axis opposes the world up direction.
  const Vec3 y = -up_residual.normalized();
  const Vec3 x = y.cross(forward);

  Mat3 r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = forward;
  return Pose::from_matrix(r, -(r * position));
}

CameraRig sample_rig(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  CameraRig rig;

  const auto add_camera = [&](int id, double radius, double height, double focal) {
    const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Camera cam;
    cam.id = id;
    cam.intrinsics.fx = cam.intrinsics.fy = focal;
    cam.intrinsics.cx = config.image_width / 2.0;
    cam.intrinsics.cy = config.image_height / 2.0;
    cam.intrinsics.width = config.image_width;
    cam.intrinsics.height = config.image_height;
    cam.intrinsics.validate();
    const Vec3 position(radius * std::cos(azimuth), radius * std::sin(azimuth), height);
    cam.pose = look_at(position, Vec3::Zero());
    rig.add(cam);
  };

  int id = 0;
  for (int i = 0; i < config.far_count; ++i)
    add_camera(id++, config.far_radius_m, config.far_height_m, config.focal_px);
  for (int i = 0; i < config.near_count; ++i)
    add_camera(id++, config.near_radius_m, config.near_height_m, config.focal_px);
  if (config.with_closeup)
    add_camera(id++, config.far_radius_m, config.far_height_m, config.closeup_focal_px);
  return rig;
}

namespace {

// Board lattice points in the board frame (z = 0 plane of the board).
std::vector<Vec3> board_lattice(const ScenarioConfig& config) {
  std::vector<Vec3> pts;
  pts.reserve(config.board_cols * config.board_rows);
  for (int r = 0; r < config.board_rows; ++r) {
    for (int c = 0; c < config.board_cols; ++c) {
      const double x = (static_cast<double>(c) / (config.board_cols - 1) - 0.5) *
                       config.board_width_m;
      const double y = (static_cast<double>(r) / (config.board_rows - 1) - 0.5) *
                       config.board_height_m;
      pts.emplace_back(x, y, 0.0);
    }
  }
  return pts;
}

Quat random_orientation(Rng& rng) {
  // Shoemake's method for uniform rotations.
  const double u1 = rng.uniform();
  const double u2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double u3 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  return Quat(b * std::cos(u3), a * std::sin(u2), a * std::cos(u2), b * std::sin(u3)).normalized();
}

bool marker_scale_detectable(const Camera& cam, const VisibilityModel& vis, const Vec3& center,
                             double side_m) {
  const double h = 0.5 * side_m;
  const std::array<Vec3, 4> corners = {center + Vec3(-h, -h, 0.0), center + Vec3(h, -h, 0.0),
                                       center + Vec3(h, h, 0.0), center + Vec3(-h, h, 0.0)};
  std::array<PixelPoint, 4> px;
  for (int i = 0; i < 4; ++i) {
    const Vec3 pc = cam.pose.apply(corners[i]);
    if (!(pc.z() > 1e-12)) return false;
    px[i] = {cam.intrinsics.fx * pc.x() / pc.z() + cam.intrinsics.cx,
             cam.intrinsics.fy * pc.y() / pc.z() + cam.intrinsics.cy};
    if (vis.require_full_quad && !cam.intrinsics.contains(px[i])) return false;
  }
  double mean_side = 0.0;
  for (int i = 0; i < 4; ++i) mean_side += (px[(i + 1) % 4] - px[i]).norm();
  mean_side /= 4.0;
  return mean_side >= vis.min_diameter_px && mean_side <= vis.max_diameter_px;
}

bool camera_sees_point(const Camera& cam, const ScenarioConfig& config,
                       const VisibilityModel& vis, const ScenePoints& points, int index) {
  const Vec3& x = points.positions[index];
  const Vec3 pc = cam.pose.apply(x);
  if (!(pc.z() > 1e-12)) return false;
  const PixelPoint px(cam.intrinsics.fx * pc.x() / pc.z() + cam.intrinsics.cx,
                      cam.intrinsics.fy * pc.y() / pc.z() + cam.intrinsics.cy);
  if (!cam.intrinsics.contains(px)) return false;

  const double min_cos = std::cos(vis.max_obliquity_deg * std::numbers::pi / 180.0);
  const int board = points.board_of_point[index];
  if (board >= 0) {
    // Pattern detection needs the front side at a workable viewing angle.
    const Vec3& n = points.boards[board].normal;
    const Vec3 to_camera = (cam.pose.center() - x).normalized();
    if (n.dot(to_camera) < min_cos) return false;
  } else if (config.scenario == Scenario::GridFloor && config.msm_visibility_gating) {
    const Vec3 to_camera = (cam.pose.center() - x).normalized();
    if (to_camera.z() < min_cos) return false;  // grazing view of the floor
    bool any_scale = false;
    for (double factor : config.marker_scales.factors) {
      if (marker_scale_detectable(cam, vis, x, config.marker_base_size_m * factor)) {
        any_scale = true;
        break;
      }
    }
    if (!any_scale) return false;
  }
  return true;
}

}  // namespace

ScenePoints sample_points(const ScenarioConfig& config, const CameraRig& rig,
                          std::uint64_t seed) {
  config.validate();
  ScenePoints points;

  if (config.scenario == Scenario::GridFloor) {
    points.positions.reserve(config.grid_cols * config.grid_rows);
    for (int r = 0; r < config.grid_rows; ++r) {
      for (int c = 0; c < config.grid_cols; ++c) {
        const double x = config.grid_cols > 1 ? (static_cast<double>(c) / (config.grid_cols - 1) -
                                                 0.5) *
                                                    config.grid_extent_x_m
                                              : 0.0;
        const double y = config.grid_rows > 1 ? (static_cast<double>(r) / (config.grid_rows - 1) -
                                                 0.5) *
                                                    config.grid_extent_y_m
                                              : 0.0;
        points.positions.emplace_back(x, y, 0.0);
        points.board_of_point.push_back(-1);
      }
    }
    return points;
  }

  Rng rng(seed);
  const std::vector<Vec3> lattice = board_lattice(config);
  VisibilityModel vis;  // board visibility does not use the marker-size window

  std::vector<int> counts(rig.size(), 0);
  const auto quotas_met = [&] {
    for (const auto& cam : rig.cameras) {
      const auto cls = config.camera_class(cam.id);
      if (cls == ScenarioConfig::CameraClass::Closeup) continue;
      const int target = cls == ScenarioConfig::CameraClass::Near ? config.target_obs_near
                                                                  : config.target_obs_far;
      if (counts[cam.id] < target) return false;
    }
    return true;
  };

  int tries = 0;
  while (!quotas_met()) {
    if (static_cast<int>(points.boards.size()) >= kMaxBoards)
      raise(ErrorCode::QuotaUnreachable,
            "observation quotas not met after " + std::to_string(kMaxBoards) + " boards");

    // Rejection-sample a placement whose lattice stays inside the region.
    Quat orientation = Quat::Identity();
    Vec3 center = Vec3::Zero();
    std::vector<Vec3> world(lattice.size());
    for (;;) {
      if (++tries > kMaxPlacementTries)
        raise(ErrorCode::QuotaUnreachable, "cannot place boards inside the working region");
      if (config.scenario == Scenario::BoardFloor) {
        const double r = config.floor_radius_m * std::sqrt(rng.uniform());
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
        center = Vec3(r * std::cos(theta), r * std::sin(theta), 0.0);
        orientation = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
      } else {
        const double r = config.volume_radius_m * std::sqrt(rng.uniform());
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        center = Vec3(r * std::cos(theta), r * std::sin(theta),
                      rng.uniform(0.0, config.volume_max_height_m));
        orientation = random_orientation(rng);
      }
      bool inside = true;
      for (std::size_t i = 0; i < lattice.size() && inside; ++i) {
        world[i] = center + orientation * lattice[i];
        if (config.scenario == Scenario::BoardFloor) {
          inside = world[i].head<2>().norm() <= config.floor_radius_m;
        } else {
          inside = world[i].head<2>().norm() <= config.volume_radius_m && world[i].z() >= 0.0 &&
                   world[i].z() <= config.volume_max_height_m;
        }
      }
      if (inside) break;
    }

    const int board_id = static_cast<int>(points.boards.size());
    points.boards.push_back({center, orientation * Vec3::UnitZ()});
    const int first = static_cast<int>(points.positions.size());
    for (const Vec3& w : world) {
      points.positions.push_back(w);
      points.board_of_point.push_back(board_id);
    }
    for (const auto& cam : rig.cameras) {
      int added = 0;
      for (std::size_t i = 0; i < world.size(); ++i)
        if (camera_sees_point(cam, config, vis, points, first + static_cast<int>(i))) ++added;
      counts[cam.id] += added;
    }
  }
  return points;
}

ObservationSet simulate_observations(const CameraRig& rig, const ScenePoints& points,
                                     const ScenarioConfig& config, double sigma_px,
                                     const VisibilityModel& visibility, std::uint64_t seed) {
  config.validate();
  visibility.validate();
  if (!(sigma_px >= 0.0)) raise(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
  const bool board_scenario = config.scenario != Scenario::GridFloor;

  ObservationSet out;
  for (const auto& cam : rig.cameras) {
    std::vector<int> visible;
    for (int i = 0; i < static_cast<int>(points.size()); ++i)
      if (camera_sees_point(cam, config, visibility, points, i)) visible.push_back(i);

    if (board_scenario) {
      const auto cls = config.camera_class(cam.id);
      if (cls != ScenarioConfig::CameraClass::Closeup) {
        const int target = cls == ScenarioConfig::CameraClass::Near ? config.target_obs_near
                                                                    : config.target_obs_far;
        if (static_cast<int>(visible.size()) > target) {
          Rng pick = Rng::stream(seed, 0x9000 + static_cast<std::uint64_t>(cam.id));
          for (int j = 0; j < target; ++j) {
            const std::size_t k = j + pick.uniform_index(visible.size() - j);
            std::swap(visible[j], visible[k]);
          }
          visible.resize(target);
          std::sort(visible.begin(), visible.end());
        }
      }
    }

    Rng noise = Rng::stream(seed, 0xA000 + static_cast<std::uint64_t>(cam.id));
    for (int i : visible) {
      Observation obs;
      obs.camera_id = cam.id;
      obs.point_id = i;
      obs.pixel = project(cam.intrinsics, cam.pose, points.positions[i]);
      if (sigma_px > 0.0) {
        obs.pixel.x() += sigma_px * noise.gaussian();
        obs.pixel.y() += sigma_px * noise.gaussian();
      }
      out.add(obs);
    }
  }
  return out;
}

SyntheticScene make_scene(const ScenarioConfig& config, const VisibilityModel& visibility) {
  SyntheticScene scene;
  scene.rig = sample_rig(config, derive_seed(config.seed, 1));
  scene.points = sample_points(config, scene.rig, derive_seed(config.seed, 2));
  scene.observations = simulate_observations(scene.rig, scene.points, config,
                                             config.noise_sigma_px, visibility,
                                             derive_seed(config.seed, 3));
  scene.noise_sigma_px = config.noise_sigma_px;
  return scene;
}

}  // namespace mscalib
