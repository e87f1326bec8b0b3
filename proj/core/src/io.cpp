#include "mscalib/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mscalib/error.hpp"
#include "mscalib/version.hpp"

namespace mscalib {

using nlohmann::json;

namespace {

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, "cannot parse " + path.string() + ": " + e.what());
  }
  return doc;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) raise(ErrorCode::IoError, "failed writing " + path.string());
}

json meta_to_json(const RunMeta& meta) {
  json config;
  try {
    config = json::parse(meta.config_json);
  } catch (const json::exception&) {
    config = json::object();
  }
  return json{{"version", meta.version}, {"command", meta.command}, {"seed", meta.seed},
              {"config", config}};
}

RunMeta meta_from_json(const json& doc) {
  RunMeta meta;
  meta.version = doc.value("version", std::string(kVersion));
  meta.command = doc.value("command", std::string());
  meta.seed = doc.value("seed", std::uint64_t{0});
  meta.config_json = doc.contains("config") ? doc.at("config").dump() : "{}";
  return meta;
}

// CSV cell for a double: shortest round-trip form, explicit "nan".
std::string csv_number(double v) {
  if (!std::isfinite(v)) return "nan";
  return json(v).dump();
}

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec2_from(const json& j) { return Vec2(j.at(0).get<double>(), j.at(1).get<double>()); }

}  // namespace

RunMeta::RunMeta() : version(kVersion) {}

void save_scene(const std::filesystem::path& path, const CameraRig& rig,
                const ScenePoints& points, const ObservationSet& observations, double sigma_px,
                const RunMeta& meta) {
  json doc = meta_to_json(meta);
  doc["kind"] = "scene";
  doc["sigma"] = sigma_px;

  json cams = json::array();
  for (const auto& c : rig.cameras) {
    cams.push_back(json{{"id", c.id},
                        {"fx", c.intrinsics.fx},
                        {"fy", c.intrinsics.fy},
                        {"cx", c.intrinsics.cx},
                        {"cy", c.intrinsics.cy},
                        {"w", c.intrinsics.width},
                        {"h", c.intrinsics.height},
                        {"qw", c.pose.rotation.w()},
                        {"qx", c.pose.rotation.x()},
                        {"qy", c.pose.rotation.y()},
                        {"qz", c.pose.rotation.z()},
                        {"tx", c.pose.translation.x()},
                        {"ty", c.pose.translation.y()},
                        {"tz", c.pose.translation.z()}});
  }
  doc["cameras"] = std::move(cams);

  json pts = json::array();
  for (std::size_t i = 0; i < points.positions.size(); ++i) {
    json p{{"id", static_cast<int>(i)},
           {"X", points.positions[i].x()},
           {"Y", points.positions[i].y()},
           {"Z", points.positions[i].z()}};
    if (points.board_of_point[i] >= 0) p["board_id"] = points.board_of_point[i];
    pts.push_back(std::move(p));
  }
  doc["points"] = std::move(pts);

  json boards = json::array();
  for (std::size_t i = 0; i < points.boards.size(); ++i) {
    const auto& b = points.boards[i];
    boards.push_back(json{{"id", static_cast<int>(i)},
                          {"cx", b.center.x()},
                          {"cy", b.center.y()},
                          {"cz", b.center.z()},
                          {"nx", b.normal.x()},
                          {"ny", b.normal.y()},
                          {"nz", b.normal.z()}});
  }
  if (!boards.empty()) doc["boards"] = std::move(boards);

  json obs = json::array();
  for (const auto& o : observations.entries()) {
    obs.push_back(json{{"camera_id", o.camera_id},
                       {"point_id", o.point_id},
                       {"u", o.pixel.x()},
                       {"v", o.pixel.y()}});
  }
  doc["observations"] = std::move(obs);

  write_file(path, doc.dump(2) + "\n");
}

SceneData load_scene(const std::filesystem::path& path) {
  const json doc = parse_file(path);
  SceneData data;
  data.meta = meta_from_json(doc);
  data.noise_sigma_px = doc.value("sigma", 0.0);

  try {
    for (const auto& c : doc.at("cameras")) {
      Camera cam;
      cam.id = c.at("id").get<int>();
      cam.intrinsics.fx = c.at("fx").get<double>();
      cam.intrinsics.fy = c.at("fy").get<double>();
      cam.intrinsics.cx = c.at("cx").get<double>();
      cam.intrinsics.cy = c.at("cy").get<double>();
      cam.intrinsics.width = c.at("w").get<int>();
      cam.intrinsics.height = c.at("h").get<int>();
      cam.pose.rotation = Quat(c.at("qw").get<double>(), c.at("qx").get<double>(),
                               c.at("qy").get<double>(), c.at("qz").get<double>())
                              .normalized();
      cam.pose.translation = Vec3(c.at("tx").get<double>(), c.at("ty").get<double>(),
                                  c.at("tz").get<double>());
      data.rig.add(cam);
    }

    std::size_t max_id = 0;
    for (const auto& p : doc.at("points"))
      max_id = std::max(max_id, static_cast<std::size_t>(p.at("id").get<int>()));
    data.points.positions.assign(max_id + 1, Vec3::Zero());
    data.points.board_of_point.assign(max_id + 1, -1);
    for (const auto& p : doc.at("points")) {
      const int id = p.at("id").get<int>();
      data.points.positions[id] =
          Vec3(p.at("X").get<double>(), p.at("Y").get<double>(), p.at("Z").get<double>());
      data.points.board_of_point[id] = p.value("board_id", -1);
    }
    if (doc.contains("boards")) {
      for (const auto& b : doc.at("boards")) {
        ScenePoints::Board board;
        board.center = Vec3(b.at("cx").get<double>(), b.at("cy").get<double>(),
                            b.at("cz").get<double>());
        board.normal = Vec3(b.at("nx").get<double>(), b.at("ny").get<double>(),
                            b.at("nz").get<double>());
        data.points.boards.push_back(board);
      }
    }

    for (const auto& o : doc.at("observations")) {
      Observation obs;
      obs.camera_id = o.at("camera_id").get<int>();
      obs.point_id = o.at("point_id").get<int>();
      obs.pixel = PixelPoint(o.at("u").get<double>(), o.at("v").get<double>());
      data.observations.add(obs);
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, "malformed scene file " + path.string() + ": " + e.what());
  }
  return data;
}

void save_schedule(const std::filesystem::path& path, const ProjectionSchedule& schedule,
                   const RunMeta& meta) {
  json doc = meta_to_json(meta);
  doc["kind"] = "schedule";
  doc["projector"] = json{{"width", schedule.projector_width},
                          {"height", schedule.projector_height}};
  doc["step_duration_ms"] = schedule.step_duration_ms;
  doc["scales"] = schedule.scales.factors;
  doc["grid"] = json{{"rows", schedule.grid.rows}, {"cols", schedule.grid.cols},
                     {"x0", schedule.grid.x0},     {"y0", schedule.grid.y0},
                     {"x1", schedule.grid.x1},     {"y1", schedule.grid.y1}};
  doc["arrays"] = schedule.arrays;
  doc["msms_per_array"] = schedule.msms_per_array;
  doc["pattern_side_px"] =
      schedule.markers.empty() ? 0.0 : schedule.markers.front().pattern.side_px;

  json steps = json::array();
  for (const auto& step : schedule.steps) {
    for (int marker_id : step.marker_ids) {
      const auto& marker = schedule.markers[marker_id];
      const auto& placement = marker.placements[step.scale_index];
      json corners = json::array();
      for (const auto& c : placement.corners) corners.push_back(vec2_json(c));
      steps.push_back(json{{"step_id", step.step_id},
                           {"array_id", step.array_id},
                           {"scale_index", step.scale_index},
                           {"marker_id", marker_id},
                           {"corners", std::move(corners)},
                           {"center", vec2_json(marker.center)}});
    }
  }
  doc["steps"] = std::move(steps);
  write_file(path, doc.dump() + "\n");
}

ProjectionSchedule load_schedule(const std::filesystem::path& path) {
  const json doc = parse_file(path);
  try {
    GridSpec grid;
    grid.rows = doc.at("grid").at("rows").get<int>();
    grid.cols = doc.at("grid").at("cols").get<int>();
    grid.x0 = doc.at("grid").at("x0").get<double>();
    grid.y0 = doc.at("grid").at("y0").get<double>();
    grid.x1 = doc.at("grid").at("x1").get<double>();
    grid.y1 = doc.at("grid").at("y1").get<double>();
    ScaleSet scales;
    scales.factors = doc.at("scales").get<std::vector<double>>();
    return generate_schedule(grid, doc.at("arrays").get<int>(),
                             doc.at("msms_per_array").get<int>(), scales,
                             doc.at("pattern_side_px").get<double>(),
                             doc.at("projector").at("width").get<int>(),
                             doc.at("projector").at("height").get<int>(),
                             doc.value("step_duration_ms", 100.0));
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, "malformed schedule file " + path.string() + ": " + e.what());
  }
}

std::vector<RawDetection> load_detections_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<RawDetection> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
      RawDetection det;
      det.camera_id = rec.at("camera_id").get<int>();
      det.step_id = rec.at("step_id").get<int>();
      det.marker_id = rec.at("marker_id").get<int>();
      det.scale_index = rec.at("scale_index").get<int>();
      if (rec.contains("corners")) {
        std::array<PixelPoint, 4> corners;
        const auto& arr = rec.at("corners");
        if (arr.size() != 4)
          raise(ErrorCode::IoError, "corners must hold 4 points");
        for (int i = 0; i < 4; ++i) corners[i] = vec2_from(arr.at(i));
        det.corners = corners;
      }
      if (rec.contains("center")) det.center = vec2_from(rec.at("center"));
      out.push_back(std::move(det));
    } catch (const json::exception& e) {
      raise(ErrorCode::IoError,
            path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_detections_jsonl(const std::filesystem::path& path,
                           std::span<const RawDetection> detections) {
  std::ostringstream out;
  for (const auto& det : detections) {
    json rec{{"camera_id", det.camera_id},
             {"step_id", det.step_id},
             {"marker_id", det.marker_id},
             {"scale_index", det.scale_index}};
    if (det.corners) {
      json corners = json::array();
      for (const auto& c : *det.corners) corners.push_back(vec2_json(c));
      rec["corners"] = std::move(corners);
    }
    if (det.center) rec["center"] = vec2_json(*det.center);
    out << rec.dump() << "\n";
  }
  write_file(path, out.str());
}

void save_reconstruction(const std::filesystem::path& path, const Reconstruction& recon,
                         const RunMeta& meta) {
  json doc = meta_to_json(meta);
  doc["kind"] = "reconstruction";
  doc["initial_pair"] = json::array({recon.initial_pair.first, recon.initial_pair.second});
  doc["final_mean_squared_cost"] = recon.final_mean_squared_cost;

  json cams = json::array();
  for (const auto& [id, cam] : recon.cameras) {
    json c{{"id", id}, {"registered", cam.registered}};
    if (cam.registered) {
      c["qw"] = cam.pose.rotation.w();
      c["qx"] = cam.pose.rotation.x();
      c["qy"] = cam.pose.rotation.y();
      c["qz"] = cam.pose.rotation.z();
      c["tx"] = cam.pose.translation.x();
      c["ty"] = cam.pose.translation.y();
      c["tz"] = cam.pose.translation.z();
      c["mean_reproj_px"] = cam.mean_reproj_px;
      c["max_reproj_px"] = cam.max_reproj_px;
      c["n_obs"] = cam.n_obs;
    }
    cams.push_back(std::move(c));
  }
  doc["cameras"] = std::move(cams);

  json pts = json::array();
  for (const auto& [id, x] : recon.points)
    pts.push_back(json{{"id", id}, {"X", x.x()}, {"Y", x.y()}, {"Z", x.z()}});
  doc["points"] = std::move(pts);

  write_file(path, doc.dump(2) + "\n");
}

ReconstructionData load_reconstruction(const std::filesystem::path& path) {
  const json doc = parse_file(path);
  ReconstructionData data;
  data.meta = meta_from_json(doc);
  try {
    data.recon.initial_pair = {doc.at("initial_pair").at(0).get<int>(),
                               doc.at("initial_pair").at(1).get<int>()};
    data.recon.final_mean_squared_cost =
        doc.at("final_mean_squared_cost").is_number()
            ? doc.at("final_mean_squared_cost").get<double>()
            : std::numeric_limits<double>::quiet_NaN();
    for (const auto& c : doc.at("cameras")) {
      CameraSolution sol;
      sol.registered = c.at("registered").get<bool>();
      if (sol.registered) {
        sol.pose.rotation = Quat(c.at("qw").get<double>(), c.at("qx").get<double>(),
                                 c.at("qy").get<double>(), c.at("qz").get<double>())
                                .normalized();
        sol.pose.translation = Vec3(c.at("tx").get<double>(), c.at("ty").get<double>(),
                                    c.at("tz").get<double>());
        sol.mean_reproj_px = c.value("mean_reproj_px", std::numeric_limits<double>::quiet_NaN());
        sol.max_reproj_px = c.value("max_reproj_px", std::numeric_limits<double>::quiet_NaN());
        sol.n_obs = c.value("n_obs", 0);
      }
      data.recon.cameras[c.at("id").get<int>()] = sol;
    }
    for (const auto& p : doc.at("points"))
      data.recon.points[p.at("id").get<int>()] =
          Vec3(p.at("X").get<double>(), p.at("Y").get<double>(), p.at("Z").get<double>());
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, "malformed reconstruction file " + path.string() + ": " + e.what());
  }
  return data;
}

void save_evaluation_report(const std::filesystem::path& path, const EvaluationReport& report,
                            const RunMeta& meta) {
  json doc = meta_to_json(meta);
  doc["kind"] = "evaluation";
  const auto number_or_null = [](double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
  };
  doc["rotation_rmse_deg"] = number_or_null(report.rotation_rmse_deg);
  doc["translation_rmse"] = number_or_null(report.translation_rmse);
  doc["overall_mean_px"] = number_or_null(report.overall_mean_px);
  doc["overall_max_px"] = number_or_null(report.overall_max_px);
  doc["point_mean_error"] = number_or_null(report.point_mean_error);
  doc["registered_cameras"] = report.registered_cameras;
  doc["total_cameras"] = report.total_cameras;
  doc["success_thresholds_px"] = report.success.thresholds_px;
  doc["success_percent"] = report.success.percent;

  json cams = json::array();
  for (const auto& c : report.per_camera) {
    cams.push_back(json{{"camera_id", c.camera_id},
                        {"n_obs", c.n_obs},
                        {"mean_px", number_or_null(c.mean_px)},
                        {"max_px", number_or_null(c.max_px)}});
  }
  doc["per_camera"] = std::move(cams);
  write_file(path, doc.dump(2) + "\n");
}

namespace {

std::string montecarlo_csv_line(const MonteCarloRow& row) {
  std::ostringstream line;
  line << to_string(row.scenario) << ',' << csv_number(row.sigma) << ',' << row.trial << ','
       << csv_number(row.rot_rmse_deg) << ',' << csv_number(row.trans_rmse) << ','
       << csv_number(row.mean_reproj_px) << ',' << (row.success ? 1 : 0);
  return line.str();
}

}  // namespace

void save_montecarlo_csv(const std::filesystem::path& path, std::span<const MonteCarloRow> rows,
                         const RunMeta& meta) {
  std::ostringstream out;
  out << "# " << meta_to_json(meta).dump() << "\n";
  out << "scenario,sigma,trial,rot_rmse_deg,trans_rmse,mean_reproj_px,success\n";
  for (const auto& row : rows) out << montecarlo_csv_line(row) << "\n";
  write_file(path, out.str());
}

void save_evaluation_csv(const std::filesystem::path& path, const MonteCarloRow& row,
                         const RunMeta& meta) {
  std::ostringstream out;
  out << "# " << meta_to_json(meta).dump() << "\n";
  out << "scenario,sigma,trial,rot_rmse_deg,trans_rmse,mean_reproj_px,success\n";
  out << montecarlo_csv_line(row) << "\n";
  write_file(path, out.str());
}

namespace {

json scenario_config_json(const ScenarioConfig& c) {
  return json{{"scenario", to_string(c.scenario)},
              {"far_count", c.far_count},
              {"far_radius_m", c.far_radius_m},
              {"far_height_m", c.far_height_m},
              {"near_count", c.near_count},
              {"near_radius_m", c.near_radius_m},
              {"near_height_m", c.near_height_m},
              {"focal_px", c.focal_px},
              {"image_width", c.image_width},
              {"image_height", c.image_height},
              {"with_closeup", c.with_closeup},
              {"closeup_focal_px", c.closeup_focal_px},
              {"board_width_m", c.board_width_m},
              {"board_height_m", c.board_height_m},
              {"board_cols", c.board_cols},
              {"board_rows", c.board_rows},
              {"volume_radius_m", c.volume_radius_m},
              {"volume_max_height_m", c.volume_max_height_m},
              {"floor_radius_m", c.floor_radius_m},
              {"target_obs_near", c.target_obs_near},
              {"target_obs_far", c.target_obs_far},
              {"grid_cols", c.grid_cols},
              {"grid_rows", c.grid_rows},
              {"grid_extent_x_m", c.grid_extent_x_m},
              {"grid_extent_y_m", c.grid_extent_y_m},
              {"marker_base_size_m", c.marker_base_size_m},
              {"marker_scales", c.marker_scales.factors},
              {"msm_visibility_gating", c.msm_visibility_gating},
              {"noise_sigma_px", c.noise_sigma_px},
              {"seed", c.seed}};
}

template <typename T>
void read_field(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

ScenarioConfig scenario_config_from(const json& doc) {
  ScenarioConfig c;
  if (doc.contains("scenario")) c.scenario = scenario_from_string(doc.at("scenario").get<std::string>());
  read_field(doc, "far_count", c.far_count);
  read_field(doc, "far_radius_m", c.far_radius_m);
  read_field(doc, "far_height_m", c.far_height_m);
  read_field(doc, "near_count", c.near_count);
  read_field(doc, "near_radius_m", c.near_radius_m);
  read_field(doc, "near_height_m", c.near_height_m);
  read_field(doc, "focal_px", c.focal_px);
  read_field(doc, "image_width", c.image_width);
  read_field(doc, "image_height", c.image_height);
  read_field(doc, "with_closeup", c.with_closeup);
  read_field(doc, "closeup_focal_px", c.closeup_focal_px);
  read_field(doc, "board_width_m", c.board_width_m);
  read_field(doc, "board_height_m", c.board_height_m);
  read_field(doc, "board_cols", c.board_cols);
  read_field(doc, "board_rows", c.board_rows);
  read_field(doc, "volume_radius_m", c.volume_radius_m);
  read_field(doc, "volume_max_height_m", c.volume_max_height_m);
  read_field(doc, "floor_radius_m", c.floor_radius_m);
  read_field(doc, "target_obs_near", c.target_obs_near);
  read_field(doc, "target_obs_far", c.target_obs_far);
  read_field(doc, "grid_cols", c.grid_cols);
  read_field(doc, "grid_rows", c.grid_rows);
  read_field(doc, "grid_extent_x_m", c.grid_extent_x_m);
  read_field(doc, "grid_extent_y_m", c.grid_extent_y_m);
  read_field(doc, "marker_base_size_m", c.marker_base_size_m);
  if (doc.contains("marker_scales"))
    c.marker_scales.factors = doc.at("marker_scales").get<std::vector<double>>();
  read_field(doc, "msm_visibility_gating", c.msm_visibility_gating);
  read_field(doc, "noise_sigma_px", c.noise_sigma_px);
  read_field(doc, "seed", c.seed);
  return c;
}

json solver_options_json(const SolverOptions& o) {
  return json{{"ransac_threshold_px", o.ransac_threshold_px},
              {"min_initial_pair_matches", o.min_initial_pair_matches},
              {"pnp_min_inliers", o.pnp_min_inliers},
              {"triangulation_max_reproj_px", o.triangulation_max_reproj_px},
              {"ba_relative_tolerance", o.ba_relative_tolerance},
              {"ba_max_iterations", o.ba_max_iterations},
              {"loss", o.loss == SolverOptions::Loss::Huber ? "huber" : "squared_l2"},
              {"huber_scale_px", o.huber_scale_px},
              {"pair_score", o.pair_score == SolverOptions::PairScore::SumOfBoth ? "sum" : "min"},
              {"coplanarity", o.coplanarity},
              {"seed", o.seed}};
}

SolverOptions solver_options_from(const json& doc) {
  SolverOptions o;
  read_field(doc, "ransac_threshold_px", o.ransac_threshold_px);
  read_field(doc, "min_initial_pair_matches", o.min_initial_pair_matches);
  read_field(doc, "pnp_min_inliers", o.pnp_min_inliers);
  read_field(doc, "triangulation_max_reproj_px", o.triangulation_max_reproj_px);
  read_field(doc, "ba_relative_tolerance", o.ba_relative_tolerance);
  read_field(doc, "ba_max_iterations", o.ba_max_iterations);
  if (doc.contains("loss"))
    o.loss = doc.at("loss").get<std::string>() == "huber" ? SolverOptions::Loss::Huber
                                                          : SolverOptions::Loss::SquaredL2;
  read_field(doc, "huber_scale_px", o.huber_scale_px);
  if (doc.contains("pair_score"))
    o.pair_score = doc.at("pair_score").get<std::string>() == "sum"
                       ? SolverOptions::PairScore::SumOfBoth
                       : SolverOptions::PairScore::MinOfBoth;
  read_field(doc, "coplanarity", o.coplanarity);
  read_field(doc, "seed", o.seed);
  return o;
}

}  // namespace

std::string scenario_config_to_json(const ScenarioConfig& config) {
  return scenario_config_json(config).dump();
}

ScenarioConfig scenario_config_from_json(const std::string& text) {
  try {
    return scenario_config_from(json::parse(text));
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, std::string("malformed scenario config: ") + e.what());
  }
}

std::string solver_options_to_json(const SolverOptions& options) {
  return solver_options_json(options).dump();
}

SolverOptions solver_options_from_json(const std::string& text) {
  try {
    return solver_options_from(json::parse(text));
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, std::string("malformed solver options: ") + e.what());
  }
}

std::string visibility_model_to_json(const VisibilityModel& model) {
  return json{{"min_diameter_px", model.min_diameter_px},
              {"max_diameter_px", model.max_diameter_px},
              {"max_obliquity_deg", model.max_obliquity_deg},
              {"require_full_quad", model.require_full_quad}}
      .dump();
}

VisibilityModel visibility_model_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    VisibilityModel m;
    read_field(doc, "min_diameter_px", m.min_diameter_px);
    read_field(doc, "max_diameter_px", m.max_diameter_px);
    read_field(doc, "max_obliquity_deg", m.max_obliquity_deg);
    read_field(doc, "require_full_quad", m.require_full_quad);
    return m;
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, std::string("malformed visibility model: ") + e.what());
  }
}

std::string load_embedded_config(const std::filesystem::path& path) {
  {
    // CSV outputs carry their meta in a leading "# {...}" comment line.
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
    std::string first;
    std::getline(in, first);
    if (first.size() > 2 && first[0] == '#') {
      try {
        const json meta = json::parse(first.substr(1));
        if (meta.contains("config")) return meta.at("config").dump();
      } catch (const json::exception&) {
        // fall through to whole-file parsing
      }
    }
  }
  const json doc = parse_file(path);
  if (doc.contains("config")) return doc.at("config").dump();
  return doc.dump();
}

}  // namespace mscalib
