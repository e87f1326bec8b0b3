#include "mscalib/homography.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>

#include "mscalib/error.hpp"
#include "mscalib/geometry.hpp"
#include "mscalib/rng.hpp"

namespace mscalib {

namespace {

constexpr double kConfidence = 0.9999;
constexpr int kMaxIterations = 10000;
constexpr int kMinConsensus = 12;
constexpr int kNeighborCount = 12;
constexpr double kAmbiguityFraction = 0.05;

struct Normalizer {
  Vec2 centroid = Vec2::Zero();
  double scale = 1.0;

  Vec2 apply(const Vec2& p) const { return (p - centroid) * scale; }
  Mat3 matrix() const {
    Mat3 t = Mat3::Identity();
    t(0, 0) = t(1, 1) = scale;
    t(0, 2) = -scale * centroid.x();
    t(1, 2) = -scale * centroid.y();
    return t;
  }
};

Normalizer make_normalizer(std::span<const NormalizedMatch> matches, bool side_a,
                           std::span<const int> subset) {
  Normalizer n;
  for (int i : subset) n.centroid += side_a ? matches[i].a : matches[i].b;
  n.centroid /= static_cast<double>(subset.size());
  double mean_norm = 0.0;
  for (int i : subset) mean_norm += ((side_a ? matches[i].a : matches[i].b) - n.centroid).norm();
  mean_norm /= static_cast<double>(subset.size());
  if (mean_norm < 1e-15) raise(ErrorCode::DegenerateGeometry, "coincident correspondences");
  n.scale = std::numbers::sqrt2 / mean_norm;
  return n;
}

Homography fit_on_subset(std::span<const NormalizedMatch> matches, std::span<const int> subset) {
  if (subset.size() < 4) raise(ErrorCode::InsufficientMatches, "homography needs >= 4 matches");
  const Normalizer na = make_normalizer(matches, true, subset);
  const Normalizer nb = make_normalizer(matches, false, subset);

  Eigen::MatrixXd design(2 * subset.size(), 9);
  for (std::size_t r = 0; r < subset.size(); ++r) {
    const Vec2 p = na.apply(matches[subset[r]].a);
    const Vec2 q = nb.apply(matches[subset[r]].b);
    design.row(2 * r) << p.x(), p.y(), 1.0, 0.0, 0.0, 0.0, -q.x() * p.x(), -q.x() * p.y(), -q.x();
    design.row(2 * r + 1) << 0.0, 0.0, 0.0, p.x(), p.y(), 1.0, -q.y() * p.x(), -q.y() * p.y(),
        -q.y();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A second vanishing singular value means the solution is not unique
  // (collinear or otherwise degenerate configurations).
  if (sv(7) <= 1e-9 * sv(0))
    raise(ErrorCode::DegenerateGeometry, "homography system is rank deficient");

  Mat3 hn;
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 unnormalized = nb.matrix().inverse() * hn * na.matrix();
  return Homography::canonical(unnormalized);
}

bool three_collinear(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 u = b - a;
  const Vec2 v = c - a;
  const double cross = u.x() * v.y() - u.y() * v.x();
  return std::abs(cross) <= 1e-12 + 1e-9 * u.norm() * v.norm();
}

bool degenerate_sample(std::span<const NormalizedMatch> matches, const std::array<int, 4>& idx) {
  for (int skip = 0; skip < 4; ++skip) {
    std::array<Vec2, 3> pa, pb;
    int k = 0;
    for (int i = 0; i < 4; ++i) {
      if (i == skip) continue;
      pa[k] = matches[idx[i]].a;
      pb[k] = matches[idx[i]].b;
      ++k;
    }
    if (three_collinear(pa[0], pa[1], pa[2]) || three_collinear(pb[0], pb[1], pb[2])) return true;
  }
  return false;
}

// Symmetric transfer error in pixels: sqrt(e_a^2 + e_b^2) with each side
// scaled by its camera's mean focal length.
int score_model(std::span<const NormalizedMatch> matches, const Mat3& h, const Mat3& h_inv,
                double focal_a, double focal_b, double threshold_px,
                std::vector<std::uint8_t>& mask) {
  int count = 0;
  const double thr_sq = threshold_px * threshold_px;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Vec3 fwd = h * Vec3(matches[i].a.x(), matches[i].a.y(), 1.0);
    const Vec3 bwd = h_inv * Vec3(matches[i].b.x(), matches[i].b.y(), 1.0);
    double err_sq = std::numeric_limits<double>::infinity();
    if (std::abs(fwd.z()) > 1e-15 && std::abs(bwd.z()) > 1e-15) {
      const double eb = (fwd.hnormalized() - matches[i].b).norm() * focal_b;
      const double ea = (bwd.hnormalized() - matches[i].a).norm() * focal_a;
      err_sq = ea * ea + eb * eb;
    }
    mask[i] = err_sq < thr_sq ? 1 : 0;
    count += mask[i];
  }
  return count;
}

int required_iterations(int inliers, int total) {
  const double w = static_cast<double>(inliers) / static_cast<double>(total);
  const double p_sample = std::pow(w, 4);
  if (p_sample >= 1.0) return 0;
  if (p_sample <= 1e-12) return kMaxIterations;
  const double n = std::log(1.0 - kConfidence) / std::log(1.0 - p_sample);
  if (!(n < static_cast<double>(kMaxIterations))) return kMaxIterations;
  return static_cast<int>(std::ceil(n));
}

std::vector<int> mask_to_indices(const std::vector<std::uint8_t>& mask) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(static_cast<int>(i));
  return idx;
}

// k nearest neighbors in the A view for locality-aware sampling.
std::vector<std::vector<int>> build_neighbors(std::span<const NormalizedMatch> matches, int k) {
  const int n = static_cast<int>(matches.size());
  std::vector<std::vector<int>> nn(n);
  std::vector<std::pair<double, int>> dist(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) dist[j] = {(matches[j].a - matches[i].a).squaredNorm(), j};
    dist[i].first = std::numeric_limits<double>::infinity();
    const int kk = std::min(k, n - 1);
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    nn[i].reserve(kk);
    for (int j = 0; j < kk; ++j) nn[i].push_back(dist[j].second);
  }
  return nn;
}

}  // namespace

Homography fit_homography_dlt(std::span<const NormalizedMatch> matches) {
  std::vector<int> all(matches.size());
  for (std::size_t i = 0; i < matches.size(); ++i) all[i] = static_cast<int>(i);
  return fit_on_subset(matches, all);
}

HomographyRansacResult estimate_homography_ransac(std::span<const NormalizedMatch> matches,
                                                  double focal_a, double focal_b,
                                                  std::uint64_t seed, double threshold_px) {
  const int n = static_cast<int>(matches.size());
  if (n < 4) raise(ErrorCode::InsufficientMatches, "homography RANSAC needs >= 4 matches");

  Rng rng(seed);
  const bool use_local = n >= 4 * kNeighborCount;
  std::vector<std::vector<int>> neighbors;
  if (use_local) neighbors = build_neighbors(matches, kNeighborCount);

  std::vector<std::uint8_t> mask(n), best_mask(n);
  Mat3 best_h = Mat3::Identity();
  int best_count = 0;
  int needed = kMaxIterations;

  for (int iter = 0; iter < needed; ++iter) {
    std::array<int, 4> idx{};
    if (use_local && (iter & 1)) {
      // Anchor plus three of its neighbors. Points on one plane are image
      // neighbors, so multi-plane scenes still yield all-coplanar samples.
      idx[0] = static_cast<int>(rng.uniform_index(n));
      const auto& nb = neighbors[idx[0]];
      for (int j = 1; j < 4; ++j) {
        for (;;) {
          const int cand = nb[rng.uniform_index(nb.size())];
          if (std::find(idx.begin(), idx.begin() + j, cand) == idx.begin() + j) {
            idx[j] = cand;
            break;
          }
        }
      }
    } else {
      for (int j = 0; j < 4; ++j) {
        for (;;) {
          const int cand = static_cast<int>(rng.uniform_index(n));
          if (std::find(idx.begin(), idx.begin() + j, cand) == idx.begin() + j) {
            idx[j] = cand;
            break;
          }
        }
      }
    }
    if (degenerate_sample(matches, idx)) continue;

    Mat3 h;
    try {
      h = fit_on_subset(matches, std::span<const int>(idx.data(), 4)).m;
    } catch (const Error&) {
      continue;
    }
    int count = score_model(matches, h, h.inverse(), focal_a, focal_b, threshold_px, mask);
    if (count <= best_count) continue;

    // Consensus refit: repair the conditioning of tight neighborhood samples.
    for (int round = 0; round < 2 && count >= 4; ++round) {
      Mat3 refit;
      try {
        refit = fit_on_subset(matches, mask_to_indices(mask)).m;
      } catch (const Error&) {
        break;
      }
      std::vector<std::uint8_t> refit_mask(n);
      const int refit_count = score_model(matches, refit, refit.inverse(), focal_a, focal_b,
                                          threshold_px, refit_mask);
      if (refit_count <= count) break;
      count = refit_count;
      h = refit;
      mask.swap(refit_mask);
    }

    if (count > best_count) {
      best_count = count;
      best_h = h;
      best_mask = mask;
      needed = std::min(kMaxIterations, std::max(iter + 1, required_iterations(best_count, n)));
    }
  }

  if (best_count < kMinConsensus)
    raise(ErrorCode::NoConsensus,
          "best homography supports only " + std::to_string(best_count) + " matches");

  HomographyRansacResult result;
  result.h = fit_on_subset(matches, mask_to_indices(best_mask));
  result.inlier_mask.assign(n, 0);
  result.inlier_count = score_model(matches, result.h.m, result.h.m.inverse(), focal_a, focal_b,
                                    threshold_px, result.inlier_mask);
  return result;
}

namespace {

void score_candidate(DecompositionCandidate& cand, std::span<const NormalizedMatch> matches) {
  const Pose identity;
  const Mat3 r = cand.relative.matrix();
  for (const auto& match : matches) {
    ScenePoint x;
    try {
      x = triangulate_two_view_normalized(identity, cand.relative, match.a, match.b);
    } catch (const Error&) {
      continue;
    }
    const double za = x.z();
    const double zb = (r * x + cand.relative.translation).z();
    if (za > 0.0 && zb > 0.0) {
      ++cand.front_count;
      if (cand.plane_normal.dot(x) > 0.0) ++cand.plane_side_count;
    }
  }
}

}  // namespace

std::vector<DecompositionCandidate> decompose_homography_candidates(
    const Homography& h, std::span<const NormalizedMatch> matches) {
  if (matches.size() < 4)
    raise(ErrorCode::InsufficientMatches, "decomposition needs >= 4 matches");

  // Normalize so the middle singular value is one, and fix the projective
  // sign so that correspondences map to the same homogeneous side.
  Eigen::JacobiSVD<Mat3> svd(h.m);
  const double sigma2 = svd.singularValues()(1);
  if (sigma2 <= 1e-15) raise(ErrorCode::DegenerateGeometry, "homography is singular");
  Mat3 hn = h.m / sigma2;
  double side = 0.0;
  for (const auto& match : matches)
    side += Vec3(match.b.x(), match.b.y(), 1.0).dot(hn * Vec3(match.a.x(), match.a.y(), 1.0));
  if (side < 0.0) hn = -hn;

  Eigen::SelfAdjointEigenSolver<Mat3> eig(hn.transpose() * hn);
  const Vec3 evals = eig.eigenvalues();  // ascending
  Vec3 v1 = eig.eigenvectors().col(2);
  const Vec3 v2 = eig.eigenvectors().col(1);
  Vec3 v3 = eig.eigenvectors().col(0);
  if (Mat3{(Mat3() << v1, v2, v3).finished()}.determinant() < 0.0) v3 = -v3;

  const double s1_sq = std::max(evals(2), 0.0);
  const double s3_sq = std::max(evals(0), 0.0);
  if (s1_sq - s3_sq < 1e-12)
    raise(ErrorCode::AmbiguousDecomposition,
          "isotropic homography (zero motion or pure rotation)");

  const double zeta = std::sqrt(s1_sq - s3_sq);
  const double a = std::sqrt(std::max(1.0 - s3_sq, 0.0));
  const double b = std::sqrt(std::max(s1_sq - 1.0, 0.0));
  const Vec3 u1 = (a * v1 + b * v3) / zeta;
  const Vec3 u2 = (a * v1 - b * v3) / zeta;

  std::vector<DecompositionCandidate> candidates;
  for (const Vec3& u : {u1, u2}) {
    Mat3 big_u, big_w;
    big_u << v2, u, v2.cross(u);
    const Vec3 hv2 = hn * v2;
    const Vec3 hu = hn * u;
    big_w << hv2, hu, hv2.cross(hu);
    const Mat3 r = big_w * big_u.transpose();
    const Vec3 n = v2.cross(u).normalized();
    const Vec3 t = (hn - r) * n;
    if (t.norm() < 1e-12) continue;
    const Vec3 tu = t.normalized();
    DecompositionCandidate cand;
    cand.relative.rotation = Quat(r).normalized();
    for (int sign : {1, -1}) {
      cand.relative.translation = sign * tu;
      cand.plane_normal = sign * n;
      cand.front_count = cand.plane_side_count = 0;
      candidates.push_back(cand);
    }
  }
  if (candidates.empty())
    raise(ErrorCode::AmbiguousDecomposition, "no translational component recovered");

  for (auto& cand : candidates) score_candidate(cand, matches);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const DecompositionCandidate& x, const DecompositionCandidate& y) {
                     if (x.front_count != y.front_count) return x.front_count > y.front_count;
                     return x.plane_side_count > y.plane_side_count;
                   });
  return candidates;
}

HomographyDecomposition decompose_homography(const Homography& h,
                                             std::span<const NormalizedMatch> inliers) {
  const auto candidates = decompose_homography_candidates(h, inliers);
  const int margin =
      candidates[0].front_count - (candidates.size() > 1 ? candidates[1].front_count : 0);
  if (candidates[0].front_count == 0 ||
      margin < static_cast<int>(std::ceil(kAmbiguityFraction * inliers.size())))
    raise(ErrorCode::AmbiguousDecomposition,
          "cheirality does not single out a decomposition (margin " + std::to_string(margin) +
              " of " + std::to_string(inliers.size()) + ")");

  HomographyDecomposition out;
  out.relative = candidates[0].relative;
  out.plane_normal = candidates[0].plane_normal;
  return out;
}

}  // namespace mscalib
