#include <benchmark/benchmark.h>

#include <vector>

#include "mscalib/geometry.hpp"
#include "mscalib/homography.hpp"
#include "mscalib/pnp.hpp"
#include "mscalib/rng.hpp"
#include "mscalib/simulator.hpp"

using namespace mscalib;

namespace {

CameraIntrinsics bench_intrinsics() {
  CameraIntrinsics intr;
  intr.fx = intr.fy = 915.0;
  intr.cx = 960.0;
  intr.cy = 540.0;
  intr.width = 1920;
  intr.height = 1080;
  return intr;
}

struct TwoViewFixture {
  CameraIntrinsics intr = bench_intrinsics();
  Pose pose_a = look_at(Vec3(2.8, 0.0, 2.8), Vec3::Zero());
  Pose pose_b = look_at(Vec3(0.0, 2.8, 2.8), Vec3::Zero());
  std::vector<ScenePoint> points;
  std::vector<PixelPoint> pixels_a, pixels_b;
  std::vector<NormalizedMatch> matches;

  explicit TwoViewFixture(int n) {
    Rng rng(7);
    while (static_cast<int>(points.size()) < n) {
      const ScenePoint x(rng.uniform(-2, 2), rng.uniform(-1.5, 1.5), 0.0);
      const PixelPoint pa = project(intr, pose_a, x);
      const PixelPoint pb = project(intr, pose_b, x);
      if (!intr.contains(pa) || !intr.contains(pb)) continue;
      points.push_back(x);
      pixels_a.push_back(pa);
      pixels_b.push_back(pb);
      matches.push_back({intr.normalize(pa), intr.normalize(pb)});
    }
  }
};

}  // namespace

static void BM_Project(benchmark::State& state) {
  const TwoViewFixture fix(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(project(fix.intr, fix.pose_a, fix.points[i % 1024]));
    ++i;
  }
}
BENCHMARK(BM_Project);

static void BM_TriangulateTwoView(benchmark::State& state) {
  const TwoViewFixture fix(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(triangulate_two_view(fix.intr, fix.pose_a, fix.intr, fix.pose_b,
                                                  fix.pixels_a[i % 1024],
                                                  fix.pixels_b[i % 1024]));
    ++i;
  }
}
BENCHMARK(BM_TriangulateTwoView);

static void BM_FitHomographyDlt(benchmark::State& state) {
  const TwoViewFixture fix(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_homography_dlt(fix.matches));
}
BENCHMARK(BM_FitHomographyDlt)->Arg(4)->Arg(64)->Arg(1024);

static void BM_HomographyRansac(benchmark::State& state) {
  const TwoViewFixture fix(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        estimate_homography_ransac(fix.matches, 915.0, 915.0, 42));
}
BENCHMARK(BM_HomographyRansac)->Arg(256)->Arg(2048)->Unit(benchmark::kMicrosecond);

static void BM_PnpRansac(benchmark::State& state) {
  const TwoViewFixture fix(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        solve_pnp_ransac(fix.points, fix.pixels_a, fix.intr, 42));
}
BENCHMARK(BM_PnpRansac)->Arg(256)->Arg(2048)->Unit(benchmark::kMicrosecond);
