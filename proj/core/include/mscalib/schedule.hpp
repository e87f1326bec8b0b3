#pragma once

#include <vector>

#include "mscalib/msm.hpp"
#include "mscalib/types.hpp"

namespace mscalib {

// Marker-center lattice over a projector-space rectangle.
struct GridSpec {
  int rows = 50;
  int cols = 64;
  double x0 = 100.0;
  double y0 = 100.0;
  double x1 = 1820.0;
  double y1 = 980.0;

  int node_count() const { return rows * cols; }
  Vec2 node(int index) const;  // index = row * cols + col
  void validate() const;
};

// Rectangle inset by `margin` pixels from the projector frame.
GridSpec grid_for_projector(int rows, int cols, int projector_width, int projector_height,
                            double margin);

struct ScheduleStep {
  int step_id = 0;
  int array_id = 0;
  int scale_index = 0;
  std::vector<int> marker_ids;
};

// Full projection sequence: `arrays` interleaved marker subsets, each shown
// once per scale factor. step_id == array_id * |scales| + scale_index.
struct ProjectionSchedule {
  int projector_width = 1920;
  int projector_height = 1080;
  double step_duration_ms = 100.0;
  ScaleSet scales;
  GridSpec grid;
  int arrays = 0;
  int msms_per_array = 0;
  std::vector<MsmDefinition> markers;  // marker id = index = grid node index
  std::vector<int> array_of_marker;
  std::vector<ScheduleStep> steps;

  const ScheduleStep* find_step(int step_id) const;
  const MsmDefinition& marker(int marker_id) const;  // throws UnknownStep on bad id
  double total_duration_ms() const { return step_duration_ms * steps.size(); }
};

// Partitions the grid nodes into `arrays` interleaved subsets (array a holds
// nodes a, a+arrays, a+2*arrays, ... so successive arrays are offset by one
// grid stride) and emits steps array-major then scale-major. Every node is
// the center of exactly one marker. Throws ShapeMismatch when
// arrays * msms_per_array != rows * cols; OutOfBounds propagates from marker
// construction.
ProjectionSchedule generate_schedule(const GridSpec& grid, int arrays, int msms_per_array,
                                     const ScaleSet& scales, double pattern_side_px,
                                     int projector_width, int projector_height,
                                     double step_duration_ms = 100.0);

}  // namespace mscalib
