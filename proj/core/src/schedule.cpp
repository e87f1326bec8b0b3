#include "mscalib/schedule.hpp"

#include "mscalib/error.hpp"

namespace mscalib {

void GridSpec::validate() const {
  if (rows < 1 || cols < 1) raise(ErrorCode::InvalidArgument, "grid needs rows, cols >= 1");
  if (!(x1 >= x0) || !(y1 >= y0)) raise(ErrorCode::InvalidArgument, "grid rectangle is inverted");
}

Vec2 GridSpec::node(int index) const {
  const int r = index / cols;
  const int c = index % cols;
  const double x = cols > 1 ? x0 + c * (x1 - x0) / (cols - 1) : 0.5 * (x0 + x1);
  const double y = rows > 1 ? y0 + r * (y1 - y0) / (rows - 1) : 0.5 * (y0 + y1);
  return {x, y};
}

GridSpec grid_for_projector(int rows, int cols, int projector_width, int projector_height,
                            double margin) {
  GridSpec g;
  g.rows = rows;
  g.cols = cols;
  g.x0 = margin;
  g.y0 = margin;
  g.x1 = projector_width - 1 - margin;
  g.y1 = projector_height - 1 - margin;
  g.validate();
  return g;
}

const ScheduleStep* ProjectionSchedule::find_step(int step_id) const {
  if (step_id < 0 || step_id >= static_cast<int>(steps.size())) return nullptr;
  return &steps[step_id];
}

const MsmDefinition& ProjectionSchedule::marker(int marker_id) const {
  if (marker_id < 0 || marker_id >= static_cast<int>(markers.size()))
    raise(ErrorCode::UnknownStep, "marker id " + std::to_string(marker_id) + " is not scheduled");
  return markers[marker_id];
}

ProjectionSchedule generate_schedule(const GridSpec& grid, int arrays, int msms_per_array,
                                     const ScaleSet& scales, double pattern_side_px,
                                     int projector_width, int projector_height,
                                     double step_duration_ms) {
  grid.validate();
  scales.validate();
  if (arrays < 1 || msms_per_array < 1)
    raise(ErrorCode::InvalidArgument, "arrays and msms_per_array must be >= 1");
  if (arrays * msms_per_array != grid.node_count())
    raise(ErrorCode::ShapeMismatch,
          std::to_string(arrays) + " arrays x " + std::to_string(msms_per_array) +
              " markers != " + std::to_string(grid.node_count()) + " grid nodes");

  ProjectionSchedule schedule;
  schedule.projector_width = projector_width;
  schedule.projector_height = projector_height;
  schedule.step_duration_ms = step_duration_ms;
  schedule.scales = scales;
  schedule.grid = grid;
  schedule.arrays = arrays;
  schedule.msms_per_array = msms_per_array;

  const int n = grid.node_count();
  schedule.markers.reserve(n);
  schedule.array_of_marker.assign(n, -1);
  for (int id = 0; id < n; ++id) {
    PatternSpec pattern;
    pattern.kind = PatternKind::SquareFiducial;
    pattern.side_px = pattern_side_px;
    pattern.marker_id = id;
    schedule.markers.push_back(
        build_msm_definition(grid.node(id), pattern, scales, projector_width, projector_height));
    schedule.array_of_marker[id] = id % arrays;
  }

  const int num_scales = static_cast<int>(scales.size());
  schedule.steps.reserve(arrays * num_scales);
  for (int a = 0; a < arrays; ++a) {
    std::vector<int> members;
    members.reserve(msms_per_array);
    for (int j = 0; j < msms_per_array; ++j) members.push_back(a + j * arrays);
    for (int s = 0; s < num_scales; ++s) {
      ScheduleStep step;
      step.step_id = a * num_scales + s;
      step.array_id = a;
      step.scale_index = s;
      step.marker_ids = members;
      schedule.steps.push_back(std::move(step));
    }
  }
  return schedule;
}

}  // namespace mscalib
