#pragma once

#include <cstdint>
#include <vector>

#include "mscalib/simulator.hpp"
#include "mscalib/solver.hpp"

namespace mscalib {

struct MonteCarloOptions {
  ScenarioConfig base;  // scenario and noise fields are overridden per cell
  VisibilityModel visibility;
  std::vector<Scenario> scenarios = {Scenario::BoardVolume, Scenario::BoardFloor,
                                     Scenario::GridFloor};
  std::vector<double> sigmas = {0.0, 0.1, 0.3, 0.5, 1.0};
  int trials = 200;
  int threads = 1;
  SolverOptions solver;
  std::uint64_t seed = 0;
};

struct MonteCarloRow {
  Scenario scenario = Scenario::GridFloor;
  double sigma = 0.0;
  int trial = 0;
  bool success = false;  // all cameras registered with finite errors
  double rot_rmse_deg = std::numeric_limits<double>::quiet_NaN();
  double trans_rmse = std::numeric_limits<double>::quiet_NaN();
  double mean_reproj_px = std::numeric_limits<double>::quiet_NaN();
};

// Sample -> simulate -> calibrate -> evaluate per (scenario, sigma, trial).
// Trial t uses seed options.seed + t, so rows are independent of the thread
// count and of sibling cells; solver failures become failed rows, not aborts.
// Rows come back sorted by (scenario, sigma, trial).
std::vector<MonteCarloRow> run_monte_carlo(const MonteCarloOptions& options);

}  // namespace mscalib
