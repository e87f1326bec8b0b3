#pragma once

#include <array>
#include <optional>
#include <span>

#include "mscalib/schedule.hpp"
#include "mscalib/types.hpp"

namespace mscalib {

// One detected marker imprint in one camera frame. Either the four corner
// pixels of the imaged quad, or a precomputed center.
struct RawDetection {
  int camera_id = 0;
  int step_id = 0;
  int marker_id = 0;
  int scale_index = 0;
  std::optional<std::array<PixelPoint, 4>> corners;
  std::optional<PixelPoint> center;
};

// Detections whose center deviates from the per-(camera, marker) median by
// more than this are dropped before fusing.
inline constexpr double kFusionGatePx = 1.0;

// Collapses the per-scale detections of every (camera, marker) pair into a
// single center observation: component-wise median, after dropping detections
// farther than kFusionGatePx from the initial median. Pairs with no surviving
// detection stay unobserved. Degenerate corner quads are skipped.
// Throws UnknownStep for step ids outside the schedule or markers not shown
// in their step, InvalidArgument for detections carrying neither corners nor
// a center.
ObservationSet fuse_detections(std::span<const RawDetection> detections,
                               const ProjectionSchedule& schedule);

}  // namespace mscalib
