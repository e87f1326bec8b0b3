#include "mscalib/detections.hpp"

#include <algorithm>
#include <map>
#include <vector>

#include "mscalib/error.hpp"
#include "mscalib/msm.hpp"

namespace mscalib {

namespace {

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Vec2 component_median(const std::vector<Vec2>& points) {
  std::vector<double> xs(points.size()), ys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    xs[i] = points[i].x();
    ys[i] = points[i].y();
  }
  return {median(std::move(xs)), median(std::move(ys))};
}

}  // namespace

ObservationSet fuse_detections(std::span<const RawDetection> detections,
                               const ProjectionSchedule& schedule) {
  std::map<std::pair<int, int>, std::vector<Vec2>> centers;  // (camera, marker) -> centers
  for (const auto& det : detections) {
    const ScheduleStep* step = schedule.find_step(det.step_id);
    if (!step) raise(ErrorCode::UnknownStep, "step id " + std::to_string(det.step_id));
    if (std::find(step->marker_ids.begin(), step->marker_ids.end(), det.marker_id) ==
        step->marker_ids.end())
      raise(ErrorCode::UnknownStep, "marker " + std::to_string(det.marker_id) +
                                        " is not shown in step " + std::to_string(det.step_id));

    Vec2 center;
    if (det.center) {
      center = *det.center;
    } else if (det.corners) {
      try {
        center = center_from_square_corners(*det.corners);
      } catch (const Error&) {
        continue;  // degenerate quad, ignore this detection
      }
    } else {
      raise(ErrorCode::InvalidArgument, "detection carries neither corners nor a center");
    }
    centers[{det.camera_id, det.marker_id}].push_back(center);
  }

  ObservationSet out;
  for (const auto& [key, all] : centers) {
    const Vec2 med = component_median(all);
    std::vector<Vec2> kept;
    kept.reserve(all.size());
    for (const Vec2& c : all)
      if ((c - med).norm() <= kFusionGatePx) kept.push_back(c);
    if (kept.empty()) continue;  // pair stays unobserved

    Observation obs;
    obs.camera_id = key.first;
    obs.point_id = key.second;
    obs.pixel = component_median(kept);
    obs.weight = 1.0;
    out.add(obs);
  }
  return out;
}

}  // namespace mscalib
