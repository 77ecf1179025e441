#include <benchmark/benchmark.h>

#include <numbers>
#include <random>

#include "trajwarp/metrics.hpp"
#include "trajwarp/pose.hpp"
#include "trajwarp/synth.hpp"

using namespace trajwarp;

namespace {

struct Fixture {
  Intrinsics K = DefaultIntrinsics();
  SceneDescription scene = SceneDescription::Make(SceneKind::kTwoPlanes, {});
  RenderOutput source = RenderScene(scene, Pose::Identity(), K);
  Pose target{RotationY(5.0 * std::numbers::pi / 180.0), Eigen::Vector3d(-0.2, 0.0, 0.05)};
  Pointmap points = LiftDepth(source.depth, K);
  FlowField flow = ComputeFlow(points, RelativePose(Pose::Identity(), target), K);
};

const Fixture& Shared() {
  static const Fixture f;
  return f;
}

void BM_ComputeFlow(benchmark::State& state) {
  const Fixture& f = Shared();
  const RelativeTransform rel = RelativePose(Pose::Identity(), f.target);
  for (auto _ : state) benchmark::DoNotOptimize(ComputeFlow(f.points, rel, f.K));
  state.SetItemsProcessed(state.iterations() * f.K.width * f.K.height);
}
BENCHMARK(BM_ComputeFlow);

void BM_ForwardWarp(benchmark::State& state) {
  const Fixture& f = Shared();
  const auto mode = static_cast<SplatMode>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ForwardWarp(f.source.frame, f.flow, mode));
  state.SetItemsProcessed(state.iterations() * f.K.width * f.K.height);
}
BENCHMARK(BM_ForwardWarp)->Arg(static_cast<int>(SplatMode::kNearest))->Arg(static_cast<int>(SplatMode::kBilinear));

void BM_AggregateAllFrames(benchmark::State& state) {
  const Intrinsics K = DefaultIntrinsics();
  const int T = static_cast<int>(state.range(0));
  const CameraTrajectory pan =
      PresetTrajectory(PresetKind::kTruck, {{"total_offset", 0.6}}, T, {K, {Pose::Identity()}});
  const SyntheticScene s = MakeScene(SceneKind::kTwoPlanes, {}, T, pan);
  std::vector<Pointmap> world;
  for (int t = 0; t < T; ++t) world.push_back(LiftDepth(s.depths[t], K, s.trajectory.poses[t]));
  for (auto _ : state) {
    benchmark::DoNotOptimize(AggregateAllFrames(s.frames, world, s.dynamic_masks, 0, s.trajectory.poses[0], K));
  }
}
BENCHMARK(BM_AggregateAllFrames)->Arg(4)->Arg(12);

void BM_Ssim(benchmark::State& state) {
  const Fixture& f = Shared();
  const Frame other = ForwardWarp(f.source.frame, f.flow).image;
  for (auto _ : state) benchmark::DoNotOptimize(Ssim(f.source.frame, other));
}
BENCHMARK(BM_Ssim);

void BM_PnpRansac(benchmark::State& state) {
  const Intrinsics K = DefaultIntrinsics();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, K.width - 1.0), v(0.0, K.height - 1.0), d(2.0, 8.0);
  const Pose truth(ExpSO3(Eigen::Vector3d(0.05, -0.1, 0.02)), Eigen::Vector3d(0.3, -0.1, 0.2));
  std::vector<Correspondence> corrs;
  while (corrs.size() < 200) {
    const Eigen::Vector3d X = Unproject({u(rng), v(rng)}, d(rng), K);
    const auto p = Project(truth.Apply(X), K);
    if (!p) continue;
    corrs.push_back({X, corrs.size() % 10 < 3 ? Eigen::Vector2d(u(rng), v(rng)) : p->pixel});
  }
  RansacConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(PnpRansac(corrs, K, config));
}
BENCHMARK(BM_PnpRansac);

}  // namespace
BENCHMARK_MAIN();
