#include <benchmark/benchmark.h>

#include "mscalib/bundle.hpp"
#include "mscalib/simulator.hpp"
#include "mscalib/solver.hpp"

using namespace mscalib;

namespace {

ScenarioConfig grid_config(int cols, int rows, double sigma) {
  ScenarioConfig config;
  config.scenario = Scenario::GridFloor;
  config.grid_cols = cols;
  config.grid_rows = rows;
  config.noise_sigma_px = sigma;
  config.seed = 11;
  return config;
}

}  // namespace

static void BM_BundleAdjustGrid(benchmark::State& state) {
  const ScenarioConfig config =
      grid_config(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 0.3);
  const SyntheticScene scene = make_scene(config);
  const CorrespondenceGraph graph(scene.observations, intrinsics_of(scene.rig));
  SolverOptions options;
  options.seed = 3;
  const Reconstruction calibrated =
      calibrate(scene.observations, intrinsics_of(scene.rig), options);

  for (auto _ : state) {
    Reconstruction recon = calibrated;
    // Nudge the points so the adjustment has work to do.
    for (auto& [id, x] : recon.points) x += Vec3(1e-4, -1e-4, 1e-4);
    benchmark::DoNotOptimize(bundle_adjust(recon, graph, options, BundleMode::Global));
  }
  state.SetLabel(std::to_string(scene.observations.size()) + " observations");
}
BENCHMARK(BM_BundleAdjustGrid)
    ->Args({20, 16})
    ->Args({64, 50})
    ->Unit(benchmark::kMillisecond);

static void BM_CalibrateGrid(benchmark::State& state) {
  const ScenarioConfig config =
      grid_config(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 0.3);
  const SyntheticScene scene = make_scene(config);
  const auto intrinsics = intrinsics_of(scene.rig);
  SolverOptions options;
  options.seed = 3;

  for (auto _ : state)
    benchmark::DoNotOptimize(calibrate(scene.observations, intrinsics, options));
  state.SetLabel(std::to_string(scene.observations.size()) + " observations");
}
BENCHMARK(BM_CalibrateGrid)
    ->Args({20, 16})
    ->Args({64, 50})
    ->Unit(benchmark::kMillisecond);

static void BM_SimulateScene(benchmark::State& state) {
  const ScenarioConfig config = grid_config(64, 50, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(make_scene(config));
}
BENCHMARK(BM_SimulateScene)->Unit(benchmark::kMillisecond);
