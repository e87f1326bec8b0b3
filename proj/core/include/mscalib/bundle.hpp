#pragma once

#include <span>

#include "mscalib/solver.hpp"

namespace mscalib {

enum class BundleMode { Pair, Intermediate, Global };

struct BundleSummary {
  double initial_cost = 0.0;  // mean squared reprojection error, px^2
  double final_cost = 0.0;
  int iterations = 0;      // linear solves performed
  int accepted_steps = 0;  // cost strictly decreased
  bool converged = false;
};

// Levenberg-Marquardt minimization of the total squared reprojection error
// over all registered poses and triangulated points, with the points
// eliminated through the Schur complement. The gauge camera stays fixed and
// the scale camera's translation is constrained to unit norm. Accepted steps
// are monotone non-increasing in cost; convergence at relative cost decrease
// below options.ba_relative_tolerance or options.ba_max_iterations solves.
//
// With options.coplanarity the points are reparametrized as (u, v) on a plane
// fitted to them at entry (origin: centroid, axes: dominant directions); the
// plane itself contributes three parameters (two tilts, one offset) and is
// optimized jointly. The resulting points satisfy the plane equation exactly
// and the fitted frame is stored on the reconstruction.
//
// Throws NonConvergence when the entry cost is not finite.
BundleSummary bundle_adjust(Reconstruction& recon, const CorrespondenceGraph& graph,
                            const SolverOptions& options, BundleMode mode);

// PCA plane fit: origin = centroid, axes = dominant directions.
// Throws DegenerateConfiguration for fewer than 3 points or rank < 2.
PlaneFrame fit_plane_frame(std::span<const ScenePoint> points);

}  // namespace mscalib
