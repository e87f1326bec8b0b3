#pragma once

#include <array>
#include <vector>

#include "mscalib/types.hpp"

namespace mscalib {

enum class PatternKind {
  SquareFiducial,
  // Declared for completeness; schedule generation only emits squares.
  ConcentricCircles,
};

struct PatternSpec {
  PatternKind kind = PatternKind::SquareFiducial;
  double side_px = 24.0;        // nominal side length at scale 1, projector pixels
  Vec2 center = Vec2::Zero();   // in pattern coordinates
  int marker_id = 0;            // payload identity
};

struct ScaleSet {
  std::vector<double> factors;

  // {1.0, 1.4, 2.0, 3.0, 4.0, 6.0, 8.0}
  static ScaleSet defaults();
  static ScaleSet single();  // {1.0}
  std::size_t size() const { return factors.size(); }
  void validate() const;  // strictly increasing, all > 0
};

struct MarkerPlacement {
  double scale = 1.0;
  std::array<Vec2, 4> corners{};  // counter-clockwise quad in projector pixels
};

// One marker: the family of scaled placements of a pattern that all share the
// same center point.
struct MsmDefinition {
  Vec2 center = Vec2::Zero();  // projector-image coordinates, fixed across scales
  PatternSpec pattern;
  ScaleSet scales;
  std::vector<MarkerPlacement> placements;  // one per scale factor
};

// Corners of an axis-aligned square, counter-clockwise from the (-,-) corner.
std::array<Vec2, 4> square_corners(const Vec2& center, double side);

// Scales the pattern about `center` for every factor; every placement's quad
// has `center` as the intersection of its diagonals. Throws OutOfBounds when
// a scaled quad leaves the projector image, InvalidArgument for non-square
// pattern kinds or invalid scale sets.
MsmDefinition build_msm_definition(const Vec2& center, const PatternSpec& pattern,
                                   const ScaleSet& scales, int projector_width,
                                   int projector_height);

// Intersection of the imaged diagonals (c0,c2) x (c1,c3), a projective
// invariant of the square. Throws DegenerateQuad when any three corners are
// collinear within 1e-12 or the diagonals are parallel.
PixelPoint center_from_square_corners(const std::array<PixelPoint, 4>& corners);

}  // namespace mscalib
