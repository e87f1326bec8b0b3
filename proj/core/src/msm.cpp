#include "mscalib/msm.hpp"

#include <cmath>

#include "mscalib/error.hpp"

namespace mscalib {

ScaleSet ScaleSet::defaults() { return ScaleSet{{1.0, 1.4, 2.0, 3.0, 4.0, 6.0, 8.0}}; }

ScaleSet ScaleSet::single() { return ScaleSet{{1.0}}; }

void ScaleSet::validate() const {
  if (factors.empty()) raise(ErrorCode::InvalidArgument, "scale set is empty");
  double prev = 0.0;
  for (double f : factors) {
    if (!(f > 0.0)) raise(ErrorCode::InvalidArgument, "scale factors must be positive");
    if (!(f > prev)) raise(ErrorCode::InvalidArgument, "scale factors must be strictly increasing");
    prev = f;
  }
}

std::array<Vec2, 4> square_corners(const Vec2& center, double side) {
  const double h = 0.5 * side;
  return {Vec2(center.x() - h, center.y() - h), Vec2(center.x() + h, center.y() - h),
          Vec2(center.x() + h, center.y() + h), Vec2(center.x() - h, center.y() + h)};
}

MsmDefinition build_msm_definition(const Vec2& center, const PatternSpec& pattern,
                                   const ScaleSet& scales, int projector_width,
                                   int projector_height) {
  if (pattern.kind != PatternKind::SquareFiducial)
    raise(ErrorCode::InvalidArgument, "only square fiducial patterns are generated");
  if (!(pattern.side_px > 0.0)) raise(ErrorCode::InvalidArgument, "pattern side must be positive");
  scales.validate();

  MsmDefinition def;
  def.center = center;
  def.pattern = pattern;
  def.pattern.center = center;
  def.scales = scales;
  def.placements.reserve(scales.size());
  for (double factor : scales.factors) {
    MarkerPlacement placement;
    placement.scale = factor;
    placement.corners = square_corners(center, pattern.side_px * factor);
    for (const Vec2& c : placement.corners) {
      if (c.x() < 0.0 || c.x() >= projector_width || c.y() < 0.0 || c.y() >= projector_height)
        raise(ErrorCode::OutOfBounds,
              "scaled quad leaves the projector image at scale " + std::to_string(factor));
    }
    def.placements.push_back(placement);
  }
  return def;
}

namespace {

bool collinear(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 u = b - a;
  const Vec2 v = c - a;
  const double cross = u.x() * v.y() - u.y() * v.x();
  return std::abs(cross) <= 1e-12 * std::max(1.0, u.norm() * v.norm());
}

}  // namespace

PixelPoint center_from_square_corners(const std::array<PixelPoint, 4>& corners) {
  static constexpr int kTriples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : kTriples) {
    if (collinear(corners[t[0]], corners[t[1]], corners[t[2]]))
      raise(ErrorCode::DegenerateQuad, "three corners are collinear");
  }

  const auto homogeneous = [](const Vec2& p) { return Vec3(p.x(), p.y(), 1.0); };
  const Vec3 diag02 = homogeneous(corners[0]).cross(homogeneous(corners[2]));
  const Vec3 diag13 = homogeneous(corners[1]).cross(homogeneous(corners[3]));
  const Vec3 x = diag02.cross(diag13);
  if (std::abs(x.z()) <= 1e-12 * x.head<2>().norm())
    raise(ErrorCode::DegenerateQuad, "diagonals are parallel");
  return {x.x() / x.z(), x.y() / x.z()};
}

}  // namespace mscalib
