#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mscalib/msm.hpp"
#include "mscalib/types.hpp"

namespace mscalib {

enum class Scenario {
  BoardVolume,  // boards at random poses inside the working cylinder
  BoardFloor,   // boards flat on the floor disc
  GridFloor,    // regular marker-center grid on the floor
};

const char* to_string(Scenario scenario) noexcept;
Scenario scenario_from_string(std::string_view name);  // throws InvalidArgument

// Detectability window for an imaged marker: pixels of mean quad side length
// plus the maximum viewing obliquity (angle between the pattern normal and
// the ray to the camera) at which detection still succeeds.
struct VisibilityModel {
  double min_diameter_px = 20.0;
  double max_diameter_px = 400.0;
  double max_obliquity_deg = 65.0;
  bool require_full_quad = true;

  void validate() const;
};

struct ScenarioConfig {
  Scenario scenario = Scenario::GridFloor;

  // Camera rig: two horizontal circles, optical axes through the origin.
  int far_count = 6;
  double far_radius_m = 2.8;
  double far_height_m = 2.8;
  int near_count = 4;
  double near_radius_m = 1.2;
  double near_height_m = 1.4;
  double focal_px = 915.0;
  int image_width = 1920;
  int image_height = 1080;
  // Optional strongly zoomed camera on the far circle.
  bool with_closeup = false;
  double closeup_focal_px = 11100.0;

  // Board scenarios.
  double board_width_m = 1.20;
  double board_height_m = 0.85;
  int board_cols = 12;  // lattice points across the width
  int board_rows = 8;
  double volume_radius_m = 3.0;
  double volume_max_height_m = 1.5;
  double floor_radius_m = 3.0;
  int target_obs_near = 2000;
  int target_obs_far = 3000;

  // Grid scenario: lattice on the floor matching the projector footprint.
  int grid_cols = 64;
  int grid_rows = 50;
  double grid_extent_x_m = 4.0;
  double grid_extent_y_m = 3.0;
  // Physical footprint of the base pattern and its projected scales; gates
  // per-camera visibility in the grid scenario.
  double marker_base_size_m = 0.05;
  ScaleSet marker_scales = ScaleSet::defaults();
  bool msm_visibility_gating = true;

  double noise_sigma_px = 0.0;
  std::uint64_t seed = 0;

  enum class CameraClass { Far, Near, Closeup };
  int camera_count() const { return far_count + near_count + (with_closeup ? 1 : 0); }
  CameraClass camera_class(int camera_id) const;
  void validate() const;
};

// Ground-truth 3D points; board members carry their board id for the
// front-face visibility test.
struct ScenePoints {
  struct Board {
    Vec3 center = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
  };

  std::vector<ScenePoint> positions;  // point id = index
  std::vector<int> board_of_point;    // -1 for grid points
  std::vector<Board> boards;

  std::size_t size() const { return positions.size(); }
};

struct SyntheticScene {
  CameraRig rig;
  ScenePoints points;
  ObservationSet observations;
  double noise_sigma_px = 0.0;
};

// World-to-camera pose with the optical axis through `target` and roll
// minimized against `world_up`.
Pose look_at(const Vec3& position, const Vec3& target, const Vec3& world_up = Vec3::UnitZ());

// Far cameras at uniformly random azimuths on the far circle, near cameras on
// the near circle, plus the optional close-up camera; ids are assigned far,
// near, close-up in order.
CameraRig sample_rig(const ScenarioConfig& config, std::uint64_t seed);

// Scenario point distribution. Board scenarios add boards until every camera
// of each class reaches its class observation target (QuotaUnreachable after
// 10'000 boards); the grid scenario is a deterministic lattice.
ScenePoints sample_points(const ScenarioConfig& config, const CameraRig& rig, std::uint64_t seed);

// Projects every visible point into every camera and adds isotropic N(0,
// sigma^2) pixel noise. Visibility: positive depth, center inside the image,
// board front face toward the camera (BoardVolume), and at least one
// detectable marker scale (GridFloor with gating enabled). In board
// scenarios, cameras holding more than their class target are subsampled to
// it.
ObservationSet simulate_observations(const CameraRig& rig, const ScenePoints& points,
                                     const ScenarioConfig& config, double sigma_px,
                                     const VisibilityModel& visibility, std::uint64_t seed);

// sample_rig + sample_points + simulate_observations with substreams of
// config.seed.
SyntheticScene make_scene(const ScenarioConfig& config, const VisibilityModel& visibility = {});

}  // namespace mscalib
