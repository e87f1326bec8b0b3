#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mscalib/detections.hpp"
#include "mscalib/eval.hpp"
#include "mscalib/montecarlo.hpp"
#include "mscalib/schedule.hpp"
#include "mscalib/simulator.hpp"
#include "mscalib/solver.hpp"

namespace mscalib {

// Provenance block embedded in every output file: artifact version, seed, and
// the fully resolved run configuration as a JSON object string. Files written
// from identical inputs are byte-identical.
struct RunMeta {
  std::string version;  // defaults to kVersion
  std::string command;
  std::uint64_t seed = 0;
  std::string config_json = "{}";

  RunMeta();
};

struct SceneData {
  CameraRig rig;
  ScenePoints points;
  ObservationSet observations;
  double noise_sigma_px = 0.0;
  RunMeta meta;
};

void save_scene(const std::filesystem::path& path, const CameraRig& rig,
                const ScenePoints& points, const ObservationSet& observations, double sigma_px,
                const RunMeta& meta);
SceneData load_scene(const std::filesystem::path& path);

void save_schedule(const std::filesystem::path& path, const ProjectionSchedule& schedule,
                   const RunMeta& meta);
ProjectionSchedule load_schedule(const std::filesystem::path& path);

// JSON lines; each record carries camera_id, step_id, marker_id, scale_index
// and either corners [[u,v] x4] or center [u,v].
std::vector<RawDetection> load_detections_jsonl(const std::filesystem::path& path);
void save_detections_jsonl(const std::filesystem::path& path,
                           std::span<const RawDetection> detections);

struct ReconstructionData {
  Reconstruction recon;
  RunMeta meta;
};

void save_reconstruction(const std::filesystem::path& path, const Reconstruction& recon,
                         const RunMeta& meta);
ReconstructionData load_reconstruction(const std::filesystem::path& path);

void save_evaluation_report(const std::filesystem::path& path, const EvaluationReport& report,
                            const RunMeta& meta);

// CSV schema: scenario,sigma,trial,rot_rmse_deg,trans_rmse,mean_reproj_px,success
void save_montecarlo_csv(const std::filesystem::path& path, std::span<const MonteCarloRow> rows,
                         const RunMeta& meta);

// A single evaluation written in the Monte-Carlo schema.
void save_evaluation_csv(const std::filesystem::path& path, const MonteCarloRow& row,
                         const RunMeta& meta);

// Config (de)serialization for CLI embedding and --config reuse.
std::string scenario_config_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_config_from_json(const std::string& text);
std::string solver_options_to_json(const SolverOptions& options);
SolverOptions solver_options_from_json(const std::string& text);
std::string visibility_model_to_json(const VisibilityModel& model);
VisibilityModel visibility_model_from_json(const std::string& text);

// Extracts the embedded "config" object of a previously written output file
// (or the whole document when none), as compact JSON text.
std::string load_embedded_config(const std::filesystem::path& path);

}  // namespace mscalib
