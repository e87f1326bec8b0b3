#pragma once

#include <array>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mscalib/solver.hpp"
#include "mscalib/types.hpp"

namespace mscalib {

// Similarity transform y = scale * rotation * x + translation.
struct Sim3Transform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
  Sim3Transform inverse() const;
};

// Closed-form similarity minimizing sum ||s R x_i + t - y_i||^2 (Umeyama
// 1991). Throws DegenerateConfiguration for fewer than 3 pairs or collinear
// sources, ShapeMismatch for unequal lengths.
Sim3Transform umeyama_align(std::span<const Vec3> source, std::span<const Vec3> target);

struct PoseErrors {
  double rotation_rmse_deg = 0.0;
  double translation_rmse = 0.0;  // scene units
};

// Per-camera geodesic rotation angle and camera-center distance after mapping
// the estimated rig through `alignment`, RMSE over cameras. The alignment is
// normally fit on the camera centers (align_camera_centers). Throws
// IdMismatch when the two id sets differ.
PoseErrors pose_errors(const std::map<int, Pose>& estimated,
                       const std::map<int, Pose>& ground_truth, const Sim3Transform& alignment);

Sim3Transform align_camera_centers(const std::map<int, Pose>& estimated,
                                   const std::map<int, Pose>& ground_truth);

struct CameraReprojStats {
  int camera_id = 0;
  int n_obs = 0;
  // Per-coordinate RMS of the reprojection residuals (estimates the noise
  // sigma) and the maximum residual norm.
  double mean_px = std::numeric_limits<double>::quiet_NaN();
  double max_px = std::numeric_limits<double>::quiet_NaN();
};

struct HeldoutReport {
  std::vector<CameraReprojStats> per_camera;
  double overall_mean_px = std::numeric_limits<double>::quiet_NaN();
  double overall_max_px = std::numeric_limits<double>::quiet_NaN();
  int evaluated_tracks = 0;
  int skipped_tracks = 0;
};

// Held-out evaluation with frozen poses: triangulate each held-out track from
// its two best-covering registered observers, refine only the 3D point, and
// report per-camera reprojection statistics. Throws NoEvaluableTracks when no
// held-out track spans two registered cameras.
HeldoutReport heldout_reprojection(const Reconstruction& recon, const ObservationSet& heldout,
                                   const IntrinsicsMap& intrinsics);

inline constexpr std::array<double, 3> kSuccessThresholdsPx = {0.5, 2.0, 5.0};

struct SuccessRates {
  std::array<double, 3> thresholds_px = kSuccessThresholdsPx;
  std::array<int, 3> percent = {0, 0, 0};  // integer-rounded
};

// Fraction of cameras whose mean reprojection error is below each threshold;
// cameras without a value (unregistered) fail every threshold.
SuccessRates success_rate(std::span<const std::optional<double>> per_camera_mean_px,
                          const std::array<double, 3>& thresholds = kSuccessThresholdsPx);

struct EvaluationReport {
  double rotation_rmse_deg = std::numeric_limits<double>::quiet_NaN();
  double translation_rmse = std::numeric_limits<double>::quiet_NaN();
  std::vector<CameraReprojStats> per_camera;  // held-out stats when available
  double overall_mean_px = std::numeric_limits<double>::quiet_NaN();
  double overall_max_px = std::numeric_limits<double>::quiet_NaN();
  SuccessRates success;
  int registered_cameras = 0;
  int total_cameras = 0;
  // Mean Euclidean 3D point error after the same alignment, when ground-truth
  // points are available.
  double point_mean_error = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace mscalib
