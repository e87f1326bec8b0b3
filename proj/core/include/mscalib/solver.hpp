#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "mscalib/types.hpp"

namespace mscalib {

struct SolverOptions {
  double ransac_threshold_px = 3.0;
  int min_initial_pair_matches = 50;
  int pnp_min_inliers = 6;
  double triangulation_max_reproj_px = 4.0;
  double ba_relative_tolerance = 1e-8;
  int ba_max_iterations = 100;

  enum class Loss { SquaredL2, Huber };
  Loss loss = Loss::SquaredL2;  // plain squared residuals by default
  double huber_scale_px = 2.0;

  enum class PairScore { MinOfBoth, SumOfBoth };
  PairScore pair_score = PairScore::MinOfBoth;

  // Reparametrize points on a jointly optimized plane during bundle
  // adjustment.
  bool coplanarity = false;

  std::uint64_t seed = 0;

  void validate() const;
};

// Tracks and per-camera observation lists derived from an ObservationSet.
// The camera set comes from the intrinsics map, so cameras without any
// observation are still represented.
class CorrespondenceGraph {
 public:
  struct TrackObservation {
    int camera_id = 0;
    PixelPoint pixel = PixelPoint::Zero();
  };
  using Track = std::vector<TrackObservation>;  // ordered by camera id

  CorrespondenceGraph(const ObservationSet& observations, const IntrinsicsMap& intrinsics);

  // Tracks of length >= 2 only; single-view observations cannot constrain
  // the calibration.
  const std::map<int, Track>& tracks() const { return tracks_; }
  const std::vector<int>& camera_ids() const { return camera_ids_; }
  const CameraIntrinsics& intrinsics(int camera_id) const;
  // (point id, pixel) pairs ordered by point id; multi-view points only.
  const std::vector<std::pair<int, PixelPoint>>& observations_of(int camera_id) const;
  int shared_track_count(int cam_a, int cam_b) const;

  struct SharedMatches {
    std::vector<int> point_ids;
    std::vector<PixelPoint> pixels_a;
    std::vector<PixelPoint> pixels_b;
  };
  SharedMatches shared_matches(int cam_a, int cam_b) const;

 private:
  std::map<int, Track> tracks_;
  std::map<int, std::vector<std::pair<int, PixelPoint>>> per_camera_;
  std::map<std::pair<int, int>, int> pair_counts_;
  std::vector<int> camera_ids_;
  IntrinsicsMap intrinsics_;
};

struct CameraSolution {
  bool registered = false;
  Pose pose;
  // Per-coordinate RMS of this camera's reprojection residuals; estimates the
  // observation noise sigma for well-converged solutions.
  double mean_reproj_px = std::numeric_limits<double>::quiet_NaN();
  double max_reproj_px = std::numeric_limits<double>::quiet_NaN();
  int n_obs = 0;
};

struct ObservationResidual {
  int camera_id = 0;
  int point_id = 0;
  Vec2 residual = Vec2::Zero();  // projection minus measurement
};

// In-plane frame of the coplanarity mode: origin on the plane, e1/e2 spanning
// it, normal = e1 x e2.
struct PlaneFrame {
  Vec3 origin = Vec3::Zero();
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();
  Vec3 normal = Vec3::UnitZ();
};

struct Reconstruction {
  // Gauge: the first camera of initial_pair sits at the identity and the
  // second keeps a unit-norm translation (baseline length one).
  std::map<int, CameraSolution> cameras;
  std::map<int, ScenePoint> points;
  std::vector<ObservationResidual> residuals;
  std::pair<int, int> initial_pair{-1, -1};
  double final_mean_squared_cost = std::numeric_limits<double>::quiet_NaN();  // px^2
  bool has_plane = false;
  PlaneFrame plane;  // set by coplanar bundle adjustment

  std::map<int, Pose> registered_poses() const;
  int registered_count() const;
};

// Pyramid coverage score: at levels l = 1..3 the image splits into 2^l x 2^l
// cells; the score adds (occupied cells at level l) * 2^l.
int compute_view_score(std::span<const PixelPoint> observations, int image_width,
                       int image_height);

// Pairs with at least min_initial_pair_matches shared tracks, best first by
// the pair score over the shared correspondences (default: max of min of both
// sides), ties by shared count, then lowest ids.
std::vector<std::pair<int, int>> rank_initial_pairs(const CorrespondenceGraph& graph,
                                                    const SolverOptions& options);

// Best entry of rank_initial_pairs. Throws NoValidPair.
std::pair<int, int> select_initial_pair(const CorrespondenceGraph& graph,
                                        const SolverOptions& options);

// Relative pose of the pair from the RANSAC homography of its normalized
// correspondences, triangulation of the inlier tracks, and a pair bundle
// adjustment. Camera A fixes the gauge, camera B the scale. Throws
// InitializationFailed.
Reconstruction initialize_pair(const CorrespondenceGraph& graph, std::pair<int, int> pair,
                               const SolverOptions& options);

// Registers the unregistered camera with the best view score over
// already-triangulated points via RANSAC resection; returns its id. Throws
// NoRegistrableCamera when nothing can be registered.
int register_next_camera(Reconstruction& recon, const CorrespondenceGraph& graph,
                         const SolverOptions& options);

// Triangulates tracks with >= 2 registered observers and no point yet; a
// track is kept when the reprojection error stays below the threshold and the
// depth is positive in every registered observer. Returns the number of new
// points.
int triangulate_tracks(Reconstruction& recon, const CorrespondenceGraph& graph,
                       const SolverOptions& options);

// Recomputes residuals, per-camera statistics, and the mean squared cost from
// the current poses and points.
void refresh_residuals(Reconstruction& recon, const CorrespondenceGraph& graph);

// Full incremental calibration: initial pair, then register-triangulate-
// adjust until no camera is left, then a global bundle adjustment. Cameras
// that cannot be registered are returned with registered = false. Determinism
// follows from the seed in the options. Throws InitializationFailed when no
// camera pair can be initialized.
Reconstruction calibrate(const ObservationSet& observations, const IntrinsicsMap& intrinsics,
                         const SolverOptions& options);

}  // namespace mscalib
