#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mscalib/types.hpp"

namespace mscalib {

struct PnpResult {
  Pose pose;
  std::vector<std::uint8_t> inlier_mask;
  int inlier_count = 0;
};

// Pose-only Levenberg-Marquardt on squared reprojection error.
Pose refine_pose(const CameraIntrinsics& intr, const Pose& initial,
                 std::span<const ScenePoint> points3d, std::span<const PixelPoint> points2d,
                 int max_iterations = 50);

// RANSAC resection with a 6-point minimal sample. Minimal fits use the DLT
// for points in general position and a plane-homography extraction when the
// sample is (near-)coplanar, where the 12-parameter DLT is rank deficient.
// Inliers by reprojection error < threshold_px; the pose is LM-refined on the
// consensus set. Deterministic for a fixed seed.
// Throws InsufficientMatches (< 6) or NoConsensus (< 6 inliers).
PnpResult solve_pnp_ransac(std::span<const ScenePoint> points3d,
                           std::span<const PixelPoint> points2d, const CameraIntrinsics& intr,
                           std::uint64_t seed, double threshold_px = 3.0);

}  // namespace mscalib
