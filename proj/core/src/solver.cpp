#include "mscalib/solver.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <bitset>
#include <cmath>

#include "mscalib/bundle.hpp"
#include "mscalib/error.hpp"
#include "mscalib/geometry.hpp"
#include "mscalib/homography.hpp"
#include "mscalib/pnp.hpp"
#include "mscalib/rng.hpp"

namespace mscalib {

namespace {

constexpr int kMaxInitAttempts = 8;
constexpr int kMinInitialPoints = 12;
// Relative 2D scatter below which a correspondence set cannot fix a
// homography.
constexpr double kCollinearScatterRatio = 1e-6;

}  // namespace

void SolverOptions::validate() const {
  if (!(ransac_threshold_px > 0.0) || !(triangulation_max_reproj_px > 0.0) ||
      !(huber_scale_px > 0.0))
    raise(ErrorCode::InvalidArgument, "solver thresholds must be positive");
  if (min_initial_pair_matches < 4 || pnp_min_inliers < 6)
    raise(ErrorCode::InvalidArgument, "solver minimum match counts are too small");
  if (!(ba_relative_tolerance > 0.0) || ba_max_iterations < 1)
    raise(ErrorCode::InvalidArgument, "bundle adjustment limits must be positive");
}

CorrespondenceGraph::CorrespondenceGraph(const ObservationSet& observations,
                                         const IntrinsicsMap& intrinsics)
    : intrinsics_(intrinsics) {
  for (const auto& [id, intr] : intrinsics_) {
    intr.validate();
    camera_ids_.push_back(id);
  }

  for (auto& [point_id, track] : observations.tracks()) {
    if (track.size() < 2) continue;
    Track converted;
    converted.reserve(track.size());
    for (const auto& obs : track) {
      if (!intrinsics_.count(obs.camera_id))
        raise(ErrorCode::IdMismatch,
              "observation references unknown camera " + std::to_string(obs.camera_id));
      converted.push_back({obs.camera_id, obs.pixel});
    }
    for (std::size_t i = 0; i < converted.size(); ++i) {
      per_camera_[converted[i].camera_id].emplace_back(point_id, converted[i].pixel);
      for (std::size_t j = i + 1; j < converted.size(); ++j)
        ++pair_counts_[{converted[i].camera_id, converted[j].camera_id}];
    }
    tracks_.emplace(point_id, std::move(converted));
  }
}

const CameraIntrinsics& CorrespondenceGraph::intrinsics(int camera_id) const {
  const auto it = intrinsics_.find(camera_id);
  if (it == intrinsics_.end())
    raise(ErrorCode::IdMismatch, "no intrinsics for camera " + std::to_string(camera_id));
  return it->second;
}

const std::vector<std::pair<int, PixelPoint>>& CorrespondenceGraph::observations_of(
    int camera_id) const {
  static const std::vector<std::pair<int, PixelPoint>> kEmpty;
  const auto it = per_camera_.find(camera_id);
  return it == per_camera_.end() ? kEmpty : it->second;
}

int CorrespondenceGraph::shared_track_count(int cam_a, int cam_b) const {
  if (cam_a > cam_b) std::swap(cam_a, cam_b);
  const auto it = pair_counts_.find({cam_a, cam_b});
  return it == pair_counts_.end() ? 0 : it->second;
}

CorrespondenceGraph::SharedMatches CorrespondenceGraph::shared_matches(int cam_a,
                                                                       int cam_b) const {
  SharedMatches out;
  for (const auto& [point_id, track] : tracks_) {
    const PixelPoint* pa = nullptr;
    const PixelPoint* pb = nullptr;
    for (const auto& obs : track) {
      if (obs.camera_id == cam_a) pa = &obs.pixel;
      if (obs.camera_id == cam_b) pb = &obs.pixel;
    }
    if (pa && pb) {
      out.point_ids.push_back(point_id);
      out.pixels_a.push_back(*pa);
      out.pixels_b.push_back(*pb);
    }
  }
  return out;
}

std::map<int, Pose> Reconstruction::registered_poses() const {
  std::map<int, Pose> out;
  for (const auto& [id, cam] : cameras)
    if (cam.registered) out[id] = cam.pose;
  return out;
}

int Reconstruction::registered_count() const {
  int n = 0;
  for (const auto& [id, cam] : cameras) n += cam.registered ? 1 : 0;
  return n;
}

int compute_view_score(std::span<const PixelPoint> observations, int image_width,
                       int image_height) {
  if (image_width < 1 || image_height < 1)
    raise(ErrorCode::InvalidArgument, "image size must be positive");
  int score = 0;
  for (int level = 1; level <= 3; ++level) {
    const int cells = 1 << level;
    std::bitset<64> occupied;
    for (const auto& px : observations) {
      const int ix = std::clamp(static_cast<int>(px.x() * cells / image_width), 0, cells - 1);
      const int iy = std::clamp(static_cast<int>(px.y() * cells / image_height), 0, cells - 1);
      occupied.set(iy * cells + ix);
    }
    score += static_cast<int>(occupied.count()) * cells;
  }
  return score;
}

std::vector<std::pair<int, int>> rank_initial_pairs(const CorrespondenceGraph& graph,
                                                    const SolverOptions& options) {
  struct Ranked {
    long long key = 0;
    int shared = 0;
    int a = 0;
    int b = 0;
  };
  std::vector<Ranked> ranked;

  const auto& ids = graph.camera_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const int a = ids[i];
      const int b = ids[j];
      const int shared = graph.shared_track_count(a, b);
      if (shared < options.min_initial_pair_matches) continue;
      const auto matches = graph.shared_matches(a, b);
      const auto& ia = graph.intrinsics(a);
      const auto& ib = graph.intrinsics(b);
      const int score_a = compute_view_score(matches.pixels_a, ia.width, ia.height);
      const int score_b = compute_view_score(matches.pixels_b, ib.width, ib.height);
      const long long key = options.pair_score == SolverOptions::PairScore::SumOfBoth
                                ? static_cast<long long>(score_a) + score_b
                                : std::min(score_a, score_b);
      ranked.push_back({key, shared, a, b});
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& x, const Ranked& y) {
    if (x.key != y.key) return x.key > y.key;
    if (x.shared != y.shared) return x.shared > y.shared;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  std::vector<std::pair<int, int>> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.emplace_back(r.a, r.b);
  return out;
}

std::pair<int, int> select_initial_pair(const CorrespondenceGraph& graph,
                                        const SolverOptions& options) {
  const auto ranked = rank_initial_pairs(graph, options);
  if (ranked.empty())
    raise(ErrorCode::NoValidPair, "no camera pair shares at least " +
                                      std::to_string(options.min_initial_pair_matches) +
                                      " tracks");
  return ranked.front();
}

namespace {

bool scatter_is_collinear(std::span<const NormalizedMatch> matches,
                          const std::vector<std::uint8_t>* mask) {
  Vec2 mean = Vec2::Zero();
  int n = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    mean += matches[i].a;
    ++n;
  }
  if (n < 3) return true;
  mean /= n;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    const Vec2 d = matches[i].a - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  return eig.eigenvalues()(0) <= kCollinearScatterRatio * std::max(eig.eigenvalues()(1), 1e-300);
}

}  // namespace

Reconstruction initialize_pair(const CorrespondenceGraph& graph, std::pair<int, int> pair,
                               const SolverOptions& options) {
  options.validate();
  const int cam_a = pair.first;
  const int cam_b = pair.second;
  const auto& intr_a = graph.intrinsics(cam_a);
  const auto& intr_b = graph.intrinsics(cam_b);

  const auto shared = graph.shared_matches(cam_a, cam_b);
  const int n = static_cast<int>(shared.point_ids.size());
  if (n < options.min_initial_pair_matches)
    raise(ErrorCode::InitializationFailed,
          "pair shares only " + std::to_string(n) + " tracks");

  std::vector<NormalizedMatch> matches(n);
  for (int i = 0; i < n; ++i) {
    matches[i].a = intr_a.normalize(shared.pixels_a[i]);
    matches[i].b = intr_b.normalize(shared.pixels_b[i]);
  }
  if (scatter_is_collinear(matches, nullptr))
    raise(ErrorCode::InitializationFailed, "pair correspondences are collinear");

  HomographyRansacResult ransac;
  try {
    ransac = estimate_homography_ransac(matches, intr_a.mean_focal(), intr_b.mean_focal(),
                                        derive_seed(options.seed, 0x300),
                                        options.ransac_threshold_px);
  } catch (const Error& e) {
    raise(ErrorCode::InitializationFailed, e.what());
  }

  std::vector<NormalizedMatch> inliers;
  std::vector<int> inlier_ids;
  for (int i = 0; i < n; ++i) {
    if (!ransac.inlier_mask[i]) continue;
    inliers.push_back(matches[i]);
    inlier_ids.push_back(shared.point_ids[i]);
  }
  if (scatter_is_collinear(inliers, nullptr))
    raise(ErrorCode::InitializationFailed, "homography consensus is collinear");

  HomographyDecomposition decomposition;
  try {
    decomposition = decompose_homography(ransac.h, inliers);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AmbiguousDecomposition)
      raise(ErrorCode::InitializationFailed, e.what());
    // Cheirality over a small plane patch can leave the twisted-pair
    // ambiguity unresolved; correspondences off that plane settle it.
    const auto candidates = decompose_homography_candidates(ransac.h, matches);
    const int margin =
        candidates[0].front_count - (candidates.size() > 1 ? candidates[1].front_count : 0);
    if (candidates[0].front_count == 0 ||
        margin < static_cast<int>(std::ceil(0.05 * matches.size())))
      raise(ErrorCode::InitializationFailed, e.what());
    decomposition.relative = candidates[0].relative;
    decomposition.plane_normal = candidates[0].plane_normal;
  }

  Reconstruction recon;
  for (int id : graph.camera_ids()) recon.cameras[id] = CameraSolution{};
  recon.initial_pair = {cam_a, cam_b};
  auto& sol_a = recon.cameras.at(cam_a);
  sol_a.registered = true;
  sol_a.pose = Pose::identity();
  auto& sol_b = recon.cameras.at(cam_b);
  sol_b.registered = true;
  sol_b.pose = decomposition.relative;  // unit baseline fixes the scale gauge

  const Pose& pose_a = sol_a.pose;
  const Pose& pose_b = sol_b.pose;
  for (std::size_t k = 0; k < inliers.size(); ++k) {
    ScenePoint x;
    try {
      x = triangulate_two_view_normalized(pose_a, pose_b, inliers[k].a, inliers[k].b);
    } catch (const Error&) {
      continue;
    }
    if (!(depth_in_camera(pose_a, x) > 0.0) || !(depth_in_camera(pose_b, x) > 0.0)) continue;
    const int point_id = inlier_ids[k];
    const auto& track = graph.tracks().at(point_id);
    double err_a = 0.0, err_b = 0.0;
    for (const auto& obs : track) {
      if (obs.camera_id == cam_a) err_a = reprojection_error_px(intr_a, pose_a, x, obs.pixel);
      if (obs.camera_id == cam_b) err_b = reprojection_error_px(intr_b, pose_b, x, obs.pixel);
    }
    if (err_a < options.triangulation_max_reproj_px && err_b < options.triangulation_max_reproj_px)
      recon.points[point_id] = x;
  }
  if (static_cast<int>(recon.points.size()) < kMinInitialPoints)
    raise(ErrorCode::InitializationFailed,
          "only " + std::to_string(recon.points.size()) + " tracks triangulated for the pair");

  const BundleSummary ba = bundle_adjust(recon, graph, options, BundleMode::Pair);
  if (!(std::sqrt(ba.final_cost) <= options.ransac_threshold_px))
    raise(ErrorCode::InitializationFailed,
          "pair adjustment left an RMS reprojection of " +
              std::to_string(std::sqrt(ba.final_cost)) + " px");
  return recon;
}

int register_next_camera(Reconstruction& recon, const CorrespondenceGraph& graph,
                         const SolverOptions& options) {
  struct Candidate {
    int score = 0;
    int camera_id = 0;
    std::vector<ScenePoint> points3d;
    std::vector<PixelPoint> points2d;
  };
  std::vector<Candidate> candidates;

  for (int id : graph.camera_ids()) {
    const auto it = recon.cameras.find(id);
    if (it != recon.cameras.end() && it->second.registered) continue;
    Candidate cand;
    cand.camera_id = id;
    std::vector<PixelPoint> pixels;
    for (const auto& [point_id, pixel] : graph.observations_of(id)) {
      const auto pit = recon.points.find(point_id);
      if (pit == recon.points.end()) continue;
      cand.points3d.push_back(pit->second);
      cand.points2d.push_back(pixel);
      pixels.push_back(pixel);
    }
    if (static_cast<int>(cand.points3d.size()) < options.pnp_min_inliers) continue;
    const auto& intr = graph.intrinsics(id);
    cand.score = compute_view_score(pixels, intr.width, intr.height);
    candidates.push_back(std::move(cand));
  }
  if (candidates.empty())
    raise(ErrorCode::NoRegistrableCamera,
          "no unregistered camera observes enough triangulated points");

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.camera_id < y.camera_id;
  });

  for (const auto& cand : candidates) {
    try {
      const auto result = solve_pnp_ransac(
          cand.points3d, cand.points2d, graph.intrinsics(cand.camera_id),
          derive_seed(options.seed, 0x500 + static_cast<std::uint64_t>(cand.camera_id)),
          options.ransac_threshold_px);
      if (result.inlier_count < options.pnp_min_inliers) continue;
      auto& sol = recon.cameras[cand.camera_id];
      sol.registered = true;
      sol.pose = result.pose;
      return cand.camera_id;
    } catch (const Error&) {
      continue;
    }
  }
  raise(ErrorCode::NoRegistrableCamera, "resection failed for every candidate camera");
}

int triangulate_tracks(Reconstruction& recon, const CorrespondenceGraph& graph,
                       const SolverOptions& options) {
  // Static per-camera coverage scores pick the observer pair for the seed
  // triangulation.
  std::map<int, int> scores;
  for (int id : graph.camera_ids()) {
    const auto it = recon.cameras.find(id);
    if (it == recon.cameras.end() || !it->second.registered) continue;
    std::vector<PixelPoint> pixels;
    for (const auto& [point_id, pixel] : graph.observations_of(id)) pixels.push_back(pixel);
    const auto& intr = graph.intrinsics(id);
    scores[id] = compute_view_score(pixels, intr.width, intr.height);
  }

  int added = 0;
  for (const auto& [point_id, track] : graph.tracks()) {
    if (recon.points.count(point_id)) continue;
    std::vector<const CorrespondenceGraph::TrackObservation*> registered;
    for (const auto& obs : track) {
      const auto it = recon.cameras.find(obs.camera_id);
      if (it != recon.cameras.end() && it->second.registered) registered.push_back(&obs);
    }
    if (registered.size() < 2) continue;

    std::sort(registered.begin(), registered.end(),
              [&](const CorrespondenceGraph::TrackObservation* x,
                  const CorrespondenceGraph::TrackObservation* y) {
                const int sx = scores.at(x->camera_id);
                const int sy = scores.at(y->camera_id);
                if (sx != sy) return sx > sy;
                return x->camera_id < y->camera_id;
              });

    const auto& obs_a = *registered[0];
    const auto& obs_b = *registered[1];
    ScenePoint x;
    try {
      x = triangulate_two_view(graph.intrinsics(obs_a.camera_id),
                               recon.cameras.at(obs_a.camera_id).pose,
                               graph.intrinsics(obs_b.camera_id),
                               recon.cameras.at(obs_b.camera_id).pose, obs_a.pixel, obs_b.pixel);
    } catch (const Error&) {
      continue;
    }

    bool ok = true;
    for (const auto* obs : registered) {
      const Pose& pose = recon.cameras.at(obs->camera_id).pose;
      if (!(depth_in_camera(pose, x) > 0.0) ||
          !(reprojection_error_px(graph.intrinsics(obs->camera_id), pose, x, obs->pixel) <
            options.triangulation_max_reproj_px)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    recon.points[point_id] = x;
    ++added;
  }
  return added;
}

void refresh_residuals(Reconstruction& recon, const CorrespondenceGraph& graph) {
  recon.residuals.clear();
  struct Acc {
    double sum_sq = 0.0;
    double max_norm = 0.0;
    int n = 0;
  };
  std::map<int, Acc> acc;

  double total_sq = 0.0;
  int total_n = 0;
  for (const auto& [point_id, x] : recon.points) {
    const auto it = graph.tracks().find(point_id);
    if (it == graph.tracks().end()) continue;
    for (const auto& obs : it->second) {
      const auto cit = recon.cameras.find(obs.camera_id);
      if (cit == recon.cameras.end() || !cit->second.registered) continue;
      const auto& intr = graph.intrinsics(obs.camera_id);
      Vec2 residual(std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity());
      const Vec3 pc = cit->second.pose.apply(x);
      if (pc.z() > 1e-12) {
        residual = Vec2(intr.fx * pc.x() / pc.z() + intr.cx - obs.pixel.x(),
                        intr.fy * pc.y() / pc.z() + intr.cy - obs.pixel.y());
      }
      recon.residuals.push_back({obs.camera_id, point_id, residual});
      auto& a = acc[obs.camera_id];
      const double nsq = residual.squaredNorm();
      a.sum_sq += nsq;
      a.max_norm = std::max(a.max_norm, residual.norm());
      ++a.n;
      total_sq += nsq;
      ++total_n;
    }
  }

  for (auto& [id, cam] : recon.cameras) {
    const auto it = acc.find(id);
    if (it == acc.end() || it->second.n == 0) {
      cam.mean_reproj_px = std::numeric_limits<double>::quiet_NaN();
      cam.max_reproj_px = std::numeric_limits<double>::quiet_NaN();
      cam.n_obs = 0;
      continue;
    }
    cam.mean_reproj_px = std::sqrt(it->second.sum_sq / (2.0 * it->second.n));
    cam.max_reproj_px = it->second.max_norm;
    cam.n_obs = it->second.n;
  }
  recon.final_mean_squared_cost =
      total_n > 0 ? total_sq / total_n : std::numeric_limits<double>::quiet_NaN();
}

Reconstruction calibrate(const ObservationSet& observations, const IntrinsicsMap& intrinsics,
                         const SolverOptions& options) {
  options.validate();
  const CorrespondenceGraph graph(observations, intrinsics);

  const auto ranked = rank_initial_pairs(graph, options);
  if (ranked.empty())
    raise(ErrorCode::InitializationFailed, "no camera pair shares enough tracks");

  Reconstruction recon;
  bool initialized = false;
  std::string last_failure;
  const int attempts = std::min<int>(kMaxInitAttempts, static_cast<int>(ranked.size()));
  for (int i = 0; i < attempts && !initialized; ++i) {
    try {
      recon = initialize_pair(graph, ranked[i], options);
      initialized = true;
    } catch (const Error& e) {
      last_failure = e.what();
    }
  }
  if (!initialized)
    raise(ErrorCode::InitializationFailed, "every candidate pair failed; last: " + last_failure);

  for (;;) {
    try {
      register_next_camera(recon, graph, options);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoRegistrableCamera) break;
      throw;
    }
    triangulate_tracks(recon, graph, options);
    bundle_adjust(recon, graph, options, BundleMode::Intermediate);
    triangulate_tracks(recon, graph, options);
  }

  bundle_adjust(recon, graph, options, BundleMode::Global);
  return recon;
}

}  // namespace mscalib
