// Command line front end: schedule generation, synthetic scenes, calibration,
// evaluation, and Monte-Carlo sweeps. Structured artifacts go to files as
// JSON/CSV; stdout carries human-readable summaries only.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mscalib/detections.hpp"
#include "mscalib/error.hpp"
#include "mscalib/eval.hpp"
#include "mscalib/io.hpp"
#include "mscalib/montecarlo.hpp"
#include "mscalib/rng.hpp"
#include "mscalib/schedule.hpp"
#include "mscalib/simulator.hpp"
#include "mscalib/solver.hpp"
#include "mscalib/version.hpp"

namespace {

using nlohmann::json;
using namespace mscalib;

// Pre-scan for --config so defaults can be loaded before CLI11 binds flags.
std::optional<std::string> find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc - 1; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config") return std::string(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return std::nullopt;
}

json config_object(const std::optional<std::string>& path) {
  if (!path) return json::object();
  const std::string text = load_embedded_config(*path);
  return json::parse(text);
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string item = csv.substr(pos, comma == std::string::npos ? csv.npos : comma - pos);
    if (!item.empty()) out.push_back(std::stod(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) raise(ErrorCode::InvalidArgument, "empty numeric list '" + csv + "'");
  return out;
}

std::vector<Scenario> parse_scenarios(const std::string& csv) {
  if (csv == "all")
    return {Scenario::BoardVolume, Scenario::BoardFloor, Scenario::GridFloor};
  std::vector<Scenario> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string item = csv.substr(pos, comma == std::string::npos ? csv.npos : comma - pos);
    if (!item.empty()) out.push_back(scenario_from_string(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) raise(ErrorCode::InvalidArgument, "empty scenario list");
  return out;
}

// Factor pair (rows, cols) for n nodes closest to the projector aspect ratio.
std::pair<int, int> factor_grid(int n, double aspect) {
  int best_r = 1, best_c = n;
  double best_err = std::numeric_limits<double>::infinity();
  for (int r = 1; r * r <= n; ++r) {
    if (n % r) continue;
    const int c = n / r;
    const double err = std::abs(static_cast<double>(c) / r - aspect);
    if (err < best_err) {
      best_err = err;
      best_r = r;
      best_c = c;
    }
  }
  return {best_r, best_c};
}

struct ScheduleArgs {
  int arrays = 100;
  int per_array = 32;
  std::string scales_csv = "1.0,1.4,2.0,3.0,4.0,6.0,8.0";
  int rows = 0;  // 0: derive from arrays * per_array
  int cols = 0;
  int proj_w = 1920;
  int proj_h = 1080;
  double margin = 100.0;
  double side_px = 24.0;
  double duration_ms = 100.0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_schedule(const ScheduleArgs& args) {
  ScaleSet scales;
  scales.factors = parse_double_list(args.scales_csv);
  int rows = args.rows, cols = args.cols;
  if (rows <= 0 || cols <= 0) {
    const auto rc = factor_grid(args.arrays * args.per_array,
                                static_cast<double>(args.proj_w) / args.proj_h);
    rows = rc.first;
    cols = rc.second;
  }
  const GridSpec grid = grid_for_projector(rows, cols, args.proj_w, args.proj_h, args.margin);
  const ProjectionSchedule schedule =
      generate_schedule(grid, args.arrays, args.per_array, scales, args.side_px, args.proj_w,
                        args.proj_h, args.duration_ms);

  RunMeta meta;
  meta.command = "schedule";
  meta.seed = args.seed;
  meta.config_json = json{{"arrays", args.arrays},
                          {"per_array", args.per_array},
                          {"scales", scales.factors},
                          {"rows", rows},
                          {"cols", cols},
                          {"proj_w", args.proj_w},
                          {"proj_h", args.proj_h},
                          {"margin", args.margin},
                          {"side_px", args.side_px},
                          {"duration_ms", args.duration_ms}}
                         .dump();
  save_schedule(args.out, schedule, meta);

  std::cout << "schedule: " << schedule.steps.size() << " steps, " << schedule.markers.size()
            << " marker centers, " << scales.size() << " scales, "
            << schedule.total_duration_ms() / 1000.0 << " s total\n"
            << "written to " << args.out << "\n";
  return 0;
}

struct SimulateArgs {
  ScenarioConfig config;
  VisibilityModel visibility;
  std::string scenario_name = "grid_floor";
  std::string scales_csv;
  std::uint64_t obs_seed = 0;  // 0: derive from config seed
  std::string out;
};

int run_simulate(SimulateArgs& args) {
  args.config.scenario = scenario_from_string(args.scenario_name);
  if (!args.scales_csv.empty()) args.config.marker_scales.factors = parse_double_list(args.scales_csv);

  SyntheticScene scene;
  scene.rig = sample_rig(args.config, derive_seed(args.config.seed, 1));
  scene.points = sample_points(args.config, scene.rig, derive_seed(args.config.seed, 2));
  const std::uint64_t obs_seed =
      args.obs_seed ? args.obs_seed : derive_seed(args.config.seed, 3);
  scene.observations = simulate_observations(scene.rig, scene.points, args.config,
                                             args.config.noise_sigma_px, args.visibility,
                                             obs_seed);
  scene.noise_sigma_px = args.config.noise_sigma_px;

  RunMeta meta;
  meta.command = "simulate";
  meta.seed = args.config.seed;
  meta.config_json = json{{"scenario_config", json::parse(scenario_config_to_json(args.config))},
                          {"visibility", json::parse(visibility_model_to_json(args.visibility))},
                          {"obs_seed", obs_seed}}
                         .dump();
  save_scene(args.out, scene.rig, scene.points, scene.observations, scene.noise_sigma_px, meta);

  std::cout << "scene: " << to_string(args.config.scenario) << ", " << scene.rig.size()
            << " cameras, " << scene.points.size() << " points, " << scene.observations.size()
            << " observations, sigma " << scene.noise_sigma_px << " px\n"
            << "written to " << args.out << "\n";
  return 0;
}

struct CalibrateArgs {
  std::string scene;
  std::string detections;
  std::string schedule;
  std::string cameras;
  SolverOptions solver;
  std::string out;
};

int run_calibrate(const CalibrateArgs& args) {
  ObservationSet observations;
  IntrinsicsMap intrinsics;
  if (!args.scene.empty()) {
    const SceneData data = load_scene(args.scene);
    observations = data.observations;
    intrinsics = intrinsics_of(data.rig);
  } else if (!args.detections.empty() && !args.schedule.empty() && !args.cameras.empty()) {
    const ProjectionSchedule schedule = load_schedule(args.schedule);
    const auto detections = load_detections_jsonl(args.detections);
    observations = fuse_detections(detections, schedule);
    intrinsics = intrinsics_of(load_scene(args.cameras).rig);
  } else {
    raise(ErrorCode::InvalidArgument,
          "calibrate needs --scene, or --detections with --schedule and --cameras");
  }

  const Reconstruction recon = calibrate(observations, intrinsics, args.solver);

  RunMeta meta;
  meta.command = "calibrate";
  meta.seed = args.solver.seed;
  meta.config_json = json{{"solver", json::parse(solver_options_to_json(args.solver))},
                          {"scene", args.scene},
                          {"detections", args.detections},
                          {"schedule", args.schedule},
                          {"cameras", args.cameras}}
                         .dump();
  save_reconstruction(args.out, recon, meta);

  std::cout << "calibration: " << recon.registered_count() << "/" << recon.cameras.size()
            << " cameras registered, " << recon.points.size() << " points, mean reprojection "
            << std::sqrt(recon.final_mean_squared_cost / 2.0) << " px (per coordinate)\n";
  for (const auto& [id, cam] : recon.cameras) {
    std::cout << "  camera " << id << ": "
              << (cam.registered ? "registered" : "unregistered");
    if (cam.registered)
      std::cout << ", mean " << cam.mean_reproj_px << " px over " << cam.n_obs
                << " observations";
    std::cout << "\n";
  }
  std::cout << "written to " << args.out << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string recon;
  std::string scene;
  std::string heldout;
  std::string out;
  std::string csv_out;
};

int run_evaluate(const EvaluateArgs& args) {
  const ReconstructionData recon_data = load_reconstruction(args.recon);
  const SceneData gt = load_scene(args.scene);
  const Reconstruction& recon = recon_data.recon;

  EvaluationReport report;
  report.total_cameras = static_cast<int>(gt.rig.size());
  report.registered_cameras = recon.registered_count();

  const auto estimated = recon.registered_poses();
  std::map<int, Pose> truth;
  for (const auto& [id, pose] : estimated) truth[id] = gt.rig.at(id).pose;

  Sim3Transform alignment;
  bool aligned = false;
  if (estimated.size() >= 3) {
    alignment = align_camera_centers(estimated, truth);
    const PoseErrors errors = pose_errors(estimated, truth, alignment);
    report.rotation_rmse_deg = errors.rotation_rmse_deg;
    report.translation_rmse = errors.translation_rmse;
    aligned = true;
  }

  if (aligned && !recon.points.empty() && !gt.points.positions.empty()) {
    double sum = 0.0;
    int n = 0;
    for (const auto& [id, x] : recon.points) {
      if (id < 0 || id >= static_cast<int>(gt.points.positions.size())) continue;
      sum += (alignment.apply(x) - gt.points.positions[id]).norm();
      ++n;
    }
    if (n > 0) report.point_mean_error = sum / n;
  }

  // Per-camera reprojection statistics: held-out when provided, calibration
  // residuals otherwise.
  std::map<int, double> mean_by_camera;
  if (!args.heldout.empty()) {
    const SceneData heldout = load_scene(args.heldout);
    const HeldoutReport held =
        heldout_reprojection(recon, heldout.observations, intrinsics_of(gt.rig));
    report.per_camera = held.per_camera;
    report.overall_mean_px = held.overall_mean_px;
    report.overall_max_px = held.overall_max_px;
    for (const auto& c : held.per_camera) mean_by_camera[c.camera_id] = c.mean_px;
  } else {
    double total_sq = 0.0;
    double max_px = 0.0;
    int total_n = 0;
    for (const auto& [id, cam] : recon.cameras) {
      if (!cam.registered || cam.n_obs == 0) continue;
      CameraReprojStats stats;
      stats.camera_id = id;
      stats.n_obs = cam.n_obs;
      stats.mean_px = cam.mean_reproj_px;
      stats.max_px = cam.max_reproj_px;
      report.per_camera.push_back(stats);
      mean_by_camera[id] = cam.mean_reproj_px;
      total_sq += cam.mean_reproj_px * cam.mean_reproj_px * 2.0 * cam.n_obs;
      max_px = std::max(max_px, cam.max_reproj_px);
      total_n += cam.n_obs;
    }
    if (total_n > 0) {
      report.overall_mean_px = std::sqrt(total_sq / (2.0 * total_n));
      report.overall_max_px = max_px;
    }
  }

  std::vector<std::optional<double>> per_camera_means;
  for (const auto& cam : gt.rig.cameras) {
    const auto rit = recon.cameras.find(cam.id);
    const bool registered = rit != recon.cameras.end() && rit->second.registered;
    const auto mit = mean_by_camera.find(cam.id);
    if (registered && mit != mean_by_camera.end())
      per_camera_means.emplace_back(mit->second);
    else
      per_camera_means.emplace_back(std::nullopt);
  }
  report.success = success_rate(per_camera_means);

  RunMeta meta;
  meta.command = "evaluate";
  meta.seed = recon_data.meta.seed;
  meta.config_json =
      json{{"recon", args.recon}, {"scene", args.scene}, {"heldout", args.heldout}}.dump();
  save_evaluation_report(args.out, report, meta);

  if (!args.csv_out.empty()) {
    MonteCarloRow row;
    try {
      const json cfg = json::parse(gt.meta.config_json);
      if (cfg.contains("scenario_config"))
        row.scenario =
            scenario_from_string(cfg.at("scenario_config").at("scenario").get<std::string>());
    } catch (const std::exception&) {
    }
    row.sigma = gt.noise_sigma_px;
    row.trial = 0;
    row.rot_rmse_deg = report.rotation_rmse_deg;
    row.trans_rmse = report.translation_rmse;
    row.mean_reproj_px = report.overall_mean_px;
    row.success = report.registered_cameras == report.total_cameras;
    save_evaluation_csv(args.csv_out, row, meta);
  }

  std::cout << "cameras registered: " << report.registered_cameras << "/" << report.total_cameras
            << "\n";
  if (aligned)
    std::cout << "rotation RMSE: " << report.rotation_rmse_deg
              << " deg, translation RMSE: " << report.translation_rmse << " scene units\n";
  if (std::isfinite(report.overall_mean_px))
    std::cout << "mean reprojection"
              << (!args.heldout.empty() ? " (held-out)" : " (calibration)") << ": "
              << report.overall_mean_px << " px\n";
  if (std::isfinite(report.point_mean_error))
    std::cout << "mean 3D point error: " << report.point_mean_error << " scene units\n";
  std::cout << "success rate % at " << report.success.thresholds_px[0] << "/"
            << report.success.thresholds_px[1] << "/" << report.success.thresholds_px[2]
            << " px: " << report.success.percent[0] << "/" << report.success.percent[1] << "/"
            << report.success.percent[2] << "\n"
            << "written to " << args.out << "\n";
  return 0;
}

struct MonteCarloArgs {
  MonteCarloOptions options;
  std::string scenarios_csv = "all";
  std::string sigmas_csv = "0.0,0.1,0.3,0.5,1.0";
  std::string out;
};

int run_montecarlo(MonteCarloArgs& args) {
  args.options.scenarios = parse_scenarios(args.scenarios_csv);
  args.options.sigmas = parse_double_list(args.sigmas_csv);
  args.options.solver.seed = args.options.seed;

  const auto rows = run_monte_carlo(args.options);

  RunMeta meta;
  meta.command = "montecarlo";
  meta.seed = args.options.seed;
  json scen = json::array();
  for (const Scenario s : args.options.scenarios) scen.push_back(to_string(s));
  meta.config_json =
      json{{"scenario_config", json::parse(scenario_config_to_json(args.options.base))},
           {"visibility", json::parse(visibility_model_to_json(args.options.visibility))},
           {"solver", json::parse(solver_options_to_json(args.options.solver))},
           {"scenarios", scen},
           {"sigmas", args.options.sigmas},
           {"trials", args.options.trials}}
          .dump();
  save_montecarlo_csv(args.out, rows, meta);

  int ok = 0;
  for (const auto& row : rows) ok += row.success ? 1 : 0;
  std::cout << "montecarlo: " << rows.size() << " rows (" << ok << " successful) written to "
            << args.out << "\n";
  return 0;
}

void bind_scenario_flags(CLI::App* cmd, ScenarioConfig& config, VisibilityModel& visibility) {
  cmd->add_option("--sigma", config.noise_sigma_px, "observation noise sigma in pixels")
      ->capture_default_str();
  cmd->add_flag("--closeup", config.with_closeup, "append the strongly zoomed camera");
  cmd->add_option("--closeup-focal", config.closeup_focal_px, "close-up focal length, pixels")
      ->capture_default_str();
  cmd->add_option("--focal", config.focal_px, "camera focal length, pixels")
      ->capture_default_str();
  cmd->add_option("--grid-cols", config.grid_cols, "grid columns")->capture_default_str();
  cmd->add_option("--grid-rows", config.grid_rows, "grid rows")->capture_default_str();
  cmd->add_option("--marker-size", config.marker_base_size_m,
                  "base marker size on the floor, meters")
      ->capture_default_str();
  auto* gating = cmd->add_flag("!--no-msm-gating", config.msm_visibility_gating,
                               "disable marker-scale visibility gating");
  (void)gating;
  cmd->add_option("--vis-min", visibility.min_diameter_px, "minimum detectable diameter, px")
      ->capture_default_str();
  cmd->add_option("--vis-max", visibility.max_diameter_px, "maximum detectable diameter, px")
      ->capture_default_str();
  cmd->add_option("--vis-obliquity", visibility.max_obliquity_deg,
                  "maximum detection obliquity, degrees")
      ->capture_default_str();
}

void bind_solver_flags(CLI::App* cmd, SolverOptions& solver) {
  cmd->add_option("--seed", solver.seed, "random seed")->capture_default_str();
  cmd->add_option("--threshold", solver.ransac_threshold_px, "RANSAC threshold, pixels")
      ->capture_default_str();
  cmd->add_flag("--coplanar", solver.coplanarity, "optimize points on a common plane");
  bool huber = false;
  cmd->add_flag("--huber", huber, "robust Huber loss instead of plain squares")
      ->each([&solver](const std::string&) { solver.loss = SolverOptions::Loss::Huber; });
  cmd->add_option("--ba-iters", solver.ba_max_iterations, "bundle adjustment iteration cap")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"projector-based multi-camera external calibration toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  json preset = json::object();
  try {
    preset = config_object(find_config_arg(argc, argv));
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "IoError"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
  std::string config_path;

  // schedule
  ScheduleArgs sched;
  if (preset.contains("arrays")) {
    sched.arrays = preset.value("arrays", sched.arrays);
    sched.per_array = preset.value("per_array", sched.per_array);
    sched.rows = preset.value("rows", sched.rows);
    sched.cols = preset.value("cols", sched.cols);
    sched.proj_w = preset.value("proj_w", sched.proj_w);
    sched.proj_h = preset.value("proj_h", sched.proj_h);
    sched.margin = preset.value("margin", sched.margin);
    sched.side_px = preset.value("side_px", sched.side_px);
    sched.duration_ms = preset.value("duration_ms", sched.duration_ms);
    if (preset.contains("scales")) {
      sched.scales_csv.clear();
      for (const auto& v : preset.at("scales"))
        sched.scales_csv += (sched.scales_csv.empty() ? "" : ",") + json(v).dump();
    }
  }
  auto* schedule_cmd = app.add_subcommand("schedule", "emit a projection schedule as JSON");
  schedule_cmd->add_option("--config", config_path, "JSON config or previous output to reuse");
  schedule_cmd->add_option("--arrays", sched.arrays, "number of marker arrays")
      ->capture_default_str();
  schedule_cmd->add_option("--per-array", sched.per_array, "markers per array")
      ->capture_default_str();
  schedule_cmd->add_option("--scales", sched.scales_csv, "comma-separated scale factors")
      ->capture_default_str();
  schedule_cmd->add_option("--rows", sched.rows, "grid rows (0: derive)")->capture_default_str();
  schedule_cmd->add_option("--cols", sched.cols, "grid cols (0: derive)")->capture_default_str();
  schedule_cmd->add_option("--proj-w", sched.proj_w, "projector width, px")
      ->capture_default_str();
  schedule_cmd->add_option("--proj-h", sched.proj_h, "projector height, px")
      ->capture_default_str();
  schedule_cmd->add_option("--margin", sched.margin, "grid margin from the frame, px")
      ->capture_default_str();
  schedule_cmd->add_option("--side", sched.side_px, "pattern side at scale 1, px")
      ->capture_default_str();
  schedule_cmd->add_option("--duration-ms", sched.duration_ms, "per-step display duration")
      ->capture_default_str();
  schedule_cmd->add_option("--seed", sched.seed, "seed recorded in the output")
      ->capture_default_str();
  schedule_cmd->add_option("--out", sched.out, "output JSON path")->required();

  // simulate
  SimulateArgs sim;
  if (preset.contains("scenario_config")) {
    sim.config = scenario_config_from_json(preset.at("scenario_config").dump());
    sim.scenario_name = to_string(sim.config.scenario);
    if (preset.contains("visibility"))
      sim.visibility = visibility_model_from_json(preset.at("visibility").dump());
  }
  auto* simulate_cmd = app.add_subcommand("simulate", "emit a synthetic scene as JSON");
  simulate_cmd->add_option("--config", config_path, "JSON config or previous output to reuse");
  simulate_cmd
      ->add_option("--scenario", sim.scenario_name,
                   "board_volume | board_floor | grid_floor")
      ->capture_default_str();
  simulate_cmd->add_option("--scales", sim.scales_csv, "comma-separated marker scale factors");
  simulate_cmd->add_option("--seed", sim.config.seed, "base random seed")->capture_default_str();
  simulate_cmd->add_option("--obs-seed", sim.obs_seed,
                           "override the observation noise stream (0: derive from --seed)");
  bind_scenario_flags(simulate_cmd, sim.config, sim.visibility);
  simulate_cmd->add_option("--out", sim.out, "output JSON path")->required();

  // calibrate
  CalibrateArgs cal;
  if (preset.contains("solver")) cal.solver = solver_options_from_json(preset.at("solver").dump());
  auto* calibrate_cmd =
      app.add_subcommand("calibrate", "estimate camera poses from observations");
  calibrate_cmd->add_option("--config", config_path, "JSON config or previous output to reuse");
  calibrate_cmd->add_option("--scene", cal.scene, "scene JSON (simulator format)");
  calibrate_cmd->add_option("--detections", cal.detections, "detections JSONL");
  calibrate_cmd->add_option("--schedule", cal.schedule, "schedule JSON for the detections");
  calibrate_cmd->add_option("--cameras", cal.cameras, "camera intrinsics JSON (scene format)");
  bind_solver_flags(calibrate_cmd, cal.solver);
  calibrate_cmd->add_option("--out", cal.out, "output reconstruction JSON")->required();

  // evaluate
  EvaluateArgs eva;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "compare a reconstruction to ground truth");
  evaluate_cmd->add_option("--recon", eva.recon, "reconstruction JSON")->required();
  evaluate_cmd->add_option("--scene", eva.scene, "ground-truth scene JSON")->required();
  evaluate_cmd->add_option("--heldout", eva.heldout, "held-out scene JSON for reprojection");
  evaluate_cmd->add_option("--out", eva.out, "output report JSON")->required();
  evaluate_cmd->add_option("--csv-out", eva.csv_out, "also write a Monte-Carlo style CSV row");

  // montecarlo
  MonteCarloArgs mc;
  mc.options.trials = 200;
  if (preset.contains("scenario_config")) {
    mc.options.base = scenario_config_from_json(preset.at("scenario_config").dump());
    if (preset.contains("visibility"))
      mc.options.visibility = visibility_model_from_json(preset.at("visibility").dump());
    if (preset.contains("solver"))
      mc.options.solver = solver_options_from_json(preset.at("solver").dump());
    mc.options.trials = preset.value("trials", mc.options.trials);
    if (preset.contains("sigmas")) {
      mc.sigmas_csv.clear();
      for (const auto& v : preset.at("sigmas"))
        mc.sigmas_csv += (mc.sigmas_csv.empty() ? "" : ",") + json(v).dump();
    }
    if (preset.contains("scenarios")) {
      mc.scenarios_csv.clear();
      for (const auto& v : preset.at("scenarios"))
        mc.scenarios_csv += (mc.scenarios_csv.empty() ? "" : ",") + v.get<std::string>();
    }
  }
  auto* mc_cmd = app.add_subcommand("montecarlo", "noise sweep over synthetic scenes");
  mc_cmd->add_option("--config", config_path, "JSON config or previous output to reuse");
  mc_cmd->add_option("--trials", mc.options.trials, "trials per (scenario, sigma)")
      ->capture_default_str();
  mc_cmd->add_option("--scenarios", mc.scenarios_csv, "'all' or comma-separated names")
      ->capture_default_str();
  mc_cmd->add_option("--sigmas", mc.sigmas_csv, "comma-separated noise sigmas, px")
      ->capture_default_str();
  mc_cmd->add_option("--threads", mc.options.threads, "worker threads (output is invariant)")
      ->capture_default_str();
  mc_cmd->add_option("--seed", mc.options.seed, "base random seed")->capture_default_str();
  bind_scenario_flags(mc_cmd, mc.options.base, mc.options.visibility);
  mc_cmd->add_flag("--coplanar", mc.options.solver.coplanarity,
                   "optimize points on a common plane");
  mc_cmd->add_option("--out", mc.out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  }

  try {
    if (schedule_cmd->parsed()) return run_schedule(sched);
    if (simulate_cmd->parsed()) return run_simulate(sim);
    if (calibrate_cmd->parsed()) return run_calibrate(cal);
    if (evaluate_cmd->parsed()) return run_evaluate(eva);
    if (mc_cmd->parsed()) return run_montecarlo(mc);
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}}.dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
  return 2;
}
