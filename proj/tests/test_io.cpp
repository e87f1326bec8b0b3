#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "mscalib/error.hpp"
#include "mscalib/io.hpp"
#include "test_support.hpp"

using namespace mscalib;
using namespace mscalib::testing;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("mscalib_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("scene files round-trip bit-exactly") {
  TempDir dir;
  const ScenarioConfig config = small_grid_config(301, 0.25);
  const SyntheticScene scene = make_scene(config);

  RunMeta meta;
  meta.command = "simulate";
  meta.seed = config.seed;
  meta.config_json = scenario_config_to_json(config);
  const auto path = dir.path / "scene.json";
  save_scene(path, scene.rig, scene.points, scene.observations, scene.noise_sigma_px, meta);

  const SceneData loaded = load_scene(path);
  CHECK(loaded.noise_sigma_px == scene.noise_sigma_px);
  REQUIRE(loaded.rig.size() == scene.rig.size());
  for (std::size_t i = 0; i < scene.rig.size(); ++i) {
    const auto& a = scene.rig.cameras[i];
    const auto& b = loaded.rig.cameras[i];
    CHECK(a.id == b.id);
    CHECK(a.intrinsics.fx == b.intrinsics.fx);
    CHECK((a.pose.translation - b.pose.translation).norm() == 0.0);
    CHECK(a.pose.rotation.coeffs() == b.pose.rotation.coeffs());
  }
  REQUIRE(loaded.points.size() == scene.points.size());
  for (std::size_t i = 0; i < scene.points.size(); ++i)
    CHECK((loaded.points.positions[i] - scene.points.positions[i]).norm() == 0.0);
  REQUIRE(loaded.observations.size() == scene.observations.size());
  for (std::size_t i = 0; i < scene.observations.size(); ++i) {
    CHECK(loaded.observations.entries()[i].pixel.x() ==
          scene.observations.entries()[i].pixel.x());
    CHECK(loaded.observations.entries()[i].pixel.y() ==
          scene.observations.entries()[i].pixel.y());
  }

  // Embedded provenance fields.
  const json doc = json::parse(slurp(path));
  CHECK(doc.at("version").get<std::string>() == std::string("0.1.0"));
  CHECK(doc.at("seed").get<std::uint64_t>() == config.seed);
  CHECK(doc.contains("config"));
}

TEST_CASE("schedule files carry the documented step fields and reload") {
  TempDir dir;
  const GridSpec grid = grid_for_projector(5, 8, 1920, 1080, 150.0);
  const auto schedule = generate_schedule(grid, 8, 5, ScaleSet{{1.0, 2.0}}, 24.0, 1920, 1080);
  const auto path = dir.path / "schedule.json";
  save_schedule(path, schedule, RunMeta{});

  const json doc = json::parse(slurp(path));
  REQUIRE(doc.at("steps").size() == 8 * 2 * 5);  // records = steps x markers/step
  const auto& rec = doc.at("steps").at(0);
  for (const char* key : {"step_id", "array_id", "scale_index", "marker_id", "corners", "center"})
    CHECK(rec.contains(key));
  CHECK(rec.at("corners").size() == 4);

  const ProjectionSchedule reloaded = load_schedule(path);
  CHECK(reloaded.steps.size() == schedule.steps.size());
  CHECK(reloaded.markers.size() == schedule.markers.size());
  CHECK((reloaded.markers[7].center - schedule.markers[7].center).norm() == 0.0);
}

TEST_CASE("detection records parse in both corner and center form") {
  TempDir dir;
  const auto path = dir.path / "detections.jsonl";
  {
    std::ofstream out(path);
    out << R"({"camera_id":0,"step_id":0,"marker_id":0,"scale_index":0,)"
        << R"("corners":[[10,10],[30,12],[28,30],[8,28]]})" << "\n";
    out << R"({"camera_id":1,"step_id":1,"marker_id":2,"scale_index":1,"center":[512.5,400.25]})"
        << "\n";
  }
  const auto detections = load_detections_jsonl(path);
  REQUIRE(detections.size() == 2);
  CHECK(detections[0].corners.has_value());
  CHECK_FALSE(detections[0].center.has_value());
  CHECK(detections[1].center.has_value());
  CHECK(detections[1].center->x() == 512.5);

  // Round-trip through the writer.
  const auto path2 = dir.path / "detections2.jsonl";
  save_detections_jsonl(path2, detections);
  const auto reloaded = load_detections_jsonl(path2);
  REQUIRE(reloaded.size() == 2);
  CHECK(reloaded[0].corners->at(2).y() == 30.0);
}

TEST_CASE("reconstruction files round-trip") {
  TempDir dir;
  const ScenarioConfig config = small_grid_config(302, 0.2);
  const SyntheticScene scene = make_scene(config);
  SolverOptions options;
  options.seed = 5;
  const Reconstruction recon =
      calibrate(scene.observations, intrinsics_of(scene.rig), options);

  const auto path = dir.path / "recon.json";
  RunMeta meta;
  meta.command = "calibrate";
  meta.seed = options.seed;
  save_reconstruction(path, recon, meta);
  const ReconstructionData loaded = load_reconstruction(path);

  CHECK(loaded.recon.initial_pair == recon.initial_pair);
  CHECK(loaded.recon.registered_count() == recon.registered_count());
  for (const auto& [id, cam] : recon.cameras) {
    if (!cam.registered) continue;
    CHECK((loaded.recon.cameras.at(id).pose.translation - cam.pose.translation).norm() == 0.0);
  }
  CHECK(loaded.recon.points.size() == recon.points.size());
}

TEST_CASE("monte-carlo CSV has the documented schema and embedded config") {
  TempDir dir;
  std::vector<MonteCarloRow> rows(2);
  rows[0] = {Scenario::GridFloor, 0.1, 0, true, 0.01, 0.002, 0.09, };
  rows[1].scenario = Scenario::BoardFloor;
  rows[1].sigma = 0.3;
  rows[1].trial = 1;
  rows[1].success = false;  // NaN metrics must print as "nan"

  RunMeta meta;
  meta.command = "montecarlo";
  meta.seed = 9;
  meta.config_json = R"({"trials":2})";
  const auto path = dir.path / "mc.csv";
  save_montecarlo_csv(path, rows, meta);

  const std::string text = slurp(path);
  CHECK(text.find("scenario,sigma,trial,rot_rmse_deg,trans_rmse,mean_reproj_px,success") !=
        std::string::npos);
  CHECK(text.find("grid_floor,0.1,0,0.01,0.002,0.09,1") != std::string::npos);
  CHECK(text.find("board_floor,0.3,1,nan,nan,nan,0") != std::string::npos);

  const std::string embedded = load_embedded_config(path);
  CHECK(json::parse(embedded).at("trials").get<int>() == 2);
}

TEST_CASE("evaluation reports serialize without loss of the success grid") {
  TempDir dir;
  EvaluationReport report;
  report.rotation_rmse_deg = 0.12;
  report.translation_rmse = 0.006;
  report.registered_cameras = 9;
  report.total_cameras = 9;
  report.success.percent = {100, 100, 100};
  const auto path = dir.path / "report.json";
  save_evaluation_report(path, report, RunMeta{});

  const json doc = json::parse(slurp(path));
  CHECK(doc.at("success_percent").at(0).get<int>() == 100);
  CHECK(doc.at("rotation_rmse_deg").get<double>() == 0.12);
  CHECK(doc.at("registered_cameras").get<int>() == 9);
}

TEST_SUITE_END();
