#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mscalib/types.hpp"

namespace mscalib {

struct NormalizedMatch {
  NormalizedPoint a = NormalizedPoint::Zero();
  NormalizedPoint b = NormalizedPoint::Zero();
};

// Least-squares DLT homography a -> b with Hartley normalization.
// Throws InsufficientMatches (< 4) or DegenerateGeometry (no unique solution).
Homography fit_homography_dlt(std::span<const NormalizedMatch> matches);

struct HomographyRansacResult {
  Homography h;
  std::vector<std::uint8_t> inlier_mask;  // refers to the returned model
  int inlier_count = 0;
};

// RANSAC over 4-point DLT fits on intrinsics-normalized correspondences.
// A match is an inlier when its symmetric transfer error, converted to pixels
// by scaling each side's normalized residual with that camera's mean focal
// length, is below threshold_px. Adaptive iteration count at confidence
// 0.9999, capped at 10'000; sampling alternates between uniform draws and
// neighborhood draws so that dominant planes of multi-plane scenes are found;
// a consensus refit runs whenever the support improves. Deterministic for a
// fixed seed.
// Throws InsufficientMatches (< 4) or NoConsensus (best support < 12).
HomographyRansacResult estimate_homography_ransac(std::span<const NormalizedMatch> matches,
                                                  double focal_a, double focal_b,
                                                  std::uint64_t seed,
                                                  double threshold_px = 3.0);

struct HomographyDecomposition {
  Pose relative;      // A -> B motion with unit-norm translation
  Vec3 plane_normal;  // unit plane normal in the A frame, n.X = d with d > 0
};

struct DecompositionCandidate {
  Pose relative;
  Vec3 plane_normal;
  int front_count = 0;       // matches triangulating in front of both views
  int plane_side_count = 0;  // of those, matches on the positive plane side
};

// The up-to-four physically distinct (R, t, n) factorizations of a calibrated
// homography H ~ R + t*n^T/d, scored by the count of matches that triangulate
// in front of both views and sorted best-first. Throws AmbiguousDecomposition
// for isotropic homographies (zero motion or pure rotation).
std::vector<DecompositionCandidate> decompose_homography_candidates(
    const Homography& h, std::span<const NormalizedMatch> matches);

// Best candidate of decompose_homography_candidates. Throws
// AmbiguousDecomposition when the two best candidates' positive-depth counts
// differ by less than 5% of the inliers; callers holding correspondences off
// the plane can break such ties by rescoring the candidates against them.
HomographyDecomposition decompose_homography(const Homography& h,
                                             std::span<const NormalizedMatch> inliers);

}  // namespace mscalib
