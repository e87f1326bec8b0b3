#include "mscalib/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "mscalib/error.hpp"
#include "mscalib/eval.hpp"
#include "mscalib/rng.hpp"

namespace mscalib {

namespace {

MonteCarloRow run_trial(const MonteCarloOptions& options, Scenario scenario, double sigma,
                        int trial) {
  MonteCarloRow row;
  row.scenario = scenario;
  row.sigma = sigma;
  row.trial = trial;

  ScenarioConfig config = options.base;
  config.scenario = scenario;
  config.noise_sigma_px = sigma;
  config.seed = options.seed + static_cast<std::uint64_t>(trial);

  try {
    const SyntheticScene scene = make_scene(config, options.visibility);
    SolverOptions solver = options.solver;
    solver.seed = derive_seed(config.seed, 4);
    const Reconstruction recon =
        calibrate(scene.observations, intrinsics_of(scene.rig), solver);

    row.mean_reproj_px = std::sqrt(recon.final_mean_squared_cost / 2.0);
    const auto estimated = recon.registered_poses();
    if (estimated.size() >= 3) {
      std::map<int, Pose> truth;
      for (const auto& [id, pose] : estimated) truth[id] = scene.rig.at(id).pose;
      const Sim3Transform alignment = align_camera_centers(estimated, truth);
      const PoseErrors errors = pose_errors(estimated, truth, alignment);
      row.rot_rmse_deg = errors.rotation_rmse_deg;
      row.trans_rmse = errors.translation_rmse;
    }
    row.success = recon.registered_count() == static_cast<int>(scene.rig.size()) &&
                  std::isfinite(row.rot_rmse_deg) && std::isfinite(row.trans_rmse);
  } catch (const Error&) {
    row.success = false;
  }
  return row;
}

}  // namespace

std::vector<MonteCarloRow> run_monte_carlo(const MonteCarloOptions& options) {
  if (options.trials < 1) raise(ErrorCode::InvalidArgument, "trials must be >= 1");

  std::vector<Scenario> scenarios = options.scenarios;
  std::sort(scenarios.begin(), scenarios.end());
  scenarios.erase(std::unique(scenarios.begin(), scenarios.end()), scenarios.end());
  std::vector<double> sigmas = options.sigmas;
  std::sort(sigmas.begin(), sigmas.end());
  sigmas.erase(std::unique(sigmas.begin(), sigmas.end()), sigmas.end());
  if (scenarios.empty() || sigmas.empty())
    raise(ErrorCode::InvalidArgument, "montecarlo needs at least one scenario and sigma");

  struct Job {
    Scenario scenario;
    double sigma;
    int trial;
  };
  std::vector<Job> jobs;
  for (Scenario sc : scenarios)
    for (double sigma : sigmas)
      for (int t = 0; t < options.trials; ++t) jobs.push_back({sc, sigma, t});

  std::vector<MonteCarloRow> rows(jobs.size());
  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      rows[i] = run_trial(options, jobs[i].scenario, jobs[i].sigma, jobs[i].trial);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= jobs.size()) return;
          rows[i] = run_trial(options, jobs[i].scenario, jobs[i].sigma, jobs[i].trial);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  // Jobs are already generated in sorted order; keep the contract explicit.
  std::stable_sort(rows.begin(), rows.end(), [](const MonteCarloRow& a, const MonteCarloRow& b) {
    if (a.scenario != b.scenario) return a.scenario < b.scenario;
    if (a.sigma != b.sigma) return a.sigma < b.sigma;
    return a.trial < b.trial;
  });
  return rows;
}

}  // namespace mscalib
