#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "trajwarp/errors.hpp"
#include "trajwarp/geometry.hpp"
#include "trajwarp/synth.hpp"

using namespace trajwarp;
using test::MaxAbs;

namespace {

DepthMap Constant(int w, int h, double d) { return DepthMap::FromValues(Grid<double>(w, h, d)); }

DepthMap RandomDepth(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.5, 8.0);
  Grid<double> values(w, h, 0.0);
  for (auto& v : values.values()) v = d(rng);
  return DepthMap::FromValues(std::move(values));
}

}  // namespace

TEST_CASE("lift: unit intrinsics and inverse pinhole") {
  const Intrinsics unit{1.0, 1.0, 0.0, 0.0, 4, 3};
  const Pointmap pm = LiftDepth(Constant(4, 3, 1.0), unit);
  CHECK(pm.frame == PointFrame::kSourceCamera);
  CHECK(pm.points(0, 0) == Eigen::Vector3d(0.0, 0.0, 1.0));
  CHECK(pm.valid(0, 0) == 1);

  const Intrinsics K{10.0, 10.0, 2.0, 1.0, 16, 8};
  const Pointmap p3 = LiftDepth(Constant(16, 8, 3.0), K);
  // pixel (cx + fx, cy) = (12, 1)
  CHECK(MaxAbs(p3.points(12, 1) - Eigen::Vector3d(3.0, 0.0, 3.0)) < 1e-15);
}

TEST_CASE("lift: invalid depth propagates, sizes are checked") {
  Grid<double> v(4, 4, 2.0);
  v(1, 2) = 0.0;
  v(3, 3) = -1.0;
  v(0, 1) = std::numeric_limits<double>::quiet_NaN();
  const Intrinsics K{4.0, 4.0, 2.0, 2.0, 4, 4};
  const Pointmap pm = LiftDepth(DepthMap::FromValues(v), K);
  CHECK(pm.valid(1, 2) == 0);
  CHECK(pm.valid(3, 3) == 0);
  CHECK(pm.valid(0, 1) == 0);
  CHECK(CountSet(pm.valid) == 13);
  CHECK_THROWS_AS(LiftDepth(Constant(5, 4, 1.0), K), InvalidArgument);
}

TEST_CASE("lift: matches a brute-force loop bit for bit") {
  const Intrinsics K{91.3, 88.1, 40.2, 29.7, 80, 60};
  const DepthMap depth = RandomDepth(80, 60, 3);
  std::mt19937_64 rng(4);
  const Pose pose = test::RandomPose(rng);
  const Pointmap cam = LiftDepth(depth, K);
  const Pointmap world = LiftDepth(depth, K, pose);
  CHECK(world.frame == PointFrame::kWorld);
  const Eigen::Matrix3d Rt = pose.rotation().transpose();
  for (int y = 0; y < 60; ++y) {
    for (int x = 0; x < 80; ++x) {
      const double d = depth.values(x, y);
      const Eigen::Vector3d expected((x - K.cx) * d / K.fx, (y - K.cy) * d / K.fy, d);
      REQUIRE(cam.points(x, y) == expected);
      // World points agree with the explicit R^T (x - t) within rounding.
      CHECK(MaxAbs(world.points(x, y) - Rt * (expected - pose.translation())) < 1e-12);
    }
  }
}

TEST_CASE("flow: identity is exactly zero") {
  const Intrinsics K = test::SmallIntrinsics();
  const DepthMap depth = RandomDepth(128, 96, 9);
  const FlowField flow = ComputeFlow(LiftDepth(depth, K), RelativeTransform{}, K);
  for (std::size_t i = 0; i < flow.vectors.size(); ++i) {
    REQUIRE(flow.valid[i] == 1);
    REQUIRE(flow.vectors[i] == Eigen::Vector2d::Zero());
    REQUIRE(flow.target_depth[i] == depth.values[i]);
  }
  std::mt19937_64 rng(10);
  const Pose e = test::RandomPose(rng);
  const FlowField world = ComputeFlow(LiftDepth(depth, K, e), RelativeTransform{}, K, e);
  for (std::size_t i = 0; i < world.vectors.size(); ++i) REQUIRE(world.vectors[i] == Eigen::Vector2d::Zero());
}

TEST_CASE("flow: lateral translation over a fronto-parallel plane") {
  const Intrinsics K = test::SmallIntrinsics();
  const double d = 4.0, delta = 0.3;
  // Camera moves +x by delta: points move -delta in the target camera.
  const RelativeTransform rel{Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(-delta, 0.0, 0.0))};
  const FlowField flow = ComputeFlow(LiftDepth(Constant(128, 96, d), K), rel, K);
  const Eigen::Vector2d expected(-K.fx * delta / d, 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < flow.vectors.size(); ++i) worst = std::max(worst, (flow.vectors[i] - expected).norm());
  CHECK(worst < 1e-6);
}

TEST_CASE("flow: 180 degree roll mirrors pixel offsets") {
  const Intrinsics K{50.0, 50.0, 8.0, 6.0, 17, 13};
  const RelativeTransform rel{Pose(RotationZ(std::numbers::pi), Eigen::Vector3d::Zero())};
  const FlowField flow = ComputeFlow(LiftDepth(RandomDepth(17, 13, 2), K), rel, K);
  for (int y = 0; y < 13; ++y) {
    for (int x = 0; x < 17; ++x) {
      const Eigen::Vector2d offset(x - K.cx, y - K.cy);
      CHECK(MaxAbs(flow.vectors(x, y) - (-2.0 * offset)) < 1e-9);
    }
  }
}

TEST_CASE("flow: points behind the target camera are invalid") {
  const Intrinsics K = test::SmallIntrinsics();
  const RelativeTransform rel{Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0.0, 0.0, -3.0))};
  Grid<double> v(128, 96, 5.0);
  for (int x = 0; x < 128; ++x) v(x, 0) = 2.0;  // row 0 lands behind
  v(5, 5) = 0.0;
  const FlowField flow = ComputeFlow(LiftDepth(DepthMap::FromValues(v), K), rel, K);
  for (int x = 0; x < 128; ++x) CHECK(flow.valid(x, 0) == 0);
  CHECK(flow.valid(5, 5) == 0);
  CHECK(flow.valid(6, 6) == 1);
  CHECK(flow.target_depth(6, 6) == doctest::Approx(2.0));
}

TEST_CASE("flow: world pointmap without the extrinsic is rejected") {
  const Intrinsics K = test::SmallIntrinsics();
  const Pointmap world = LiftDepth(Constant(128, 96, 1.0), K, Pose::Identity());
  CHECK_THROWS_AS(ComputeFlow(world, RelativeTransform{}, K), InvalidArgument);
  const Pointmap small = LiftDepth(Constant(4, 4, 1.0), Intrinsics{2.0, 2.0, 2.0, 2.0, 4, 4});
  CHECK_THROWS_AS(ComputeFlow(small, RelativeTransform{}, K), InvalidArgument);
}

TEST_CASE("flow: validity is a subset of pointmap validity") {
  const Intrinsics K = test::SmallIntrinsics();
  Grid<double> v(128, 96, 3.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) v(static_cast<int>(rng() % 128), static_cast<int>(rng() % 96)) = -1.0;
  const Pointmap pm = LiftDepth(DepthMap::FromValues(v), K);
  const FlowField flow = ComputeFlow(pm, RelativeTransform{test::RandomPose(rng, 0.2, 0.5)}, K);
  for (std::size_t i = 0; i < pm.valid.size(); ++i) {
    if (flow.valid[i]) CHECK(pm.valid[i] == 1);
  }
}

TEST_CASE("flow: forward then inverse returns to the start on co-visible pixels") {
  const Intrinsics K = DefaultIntrinsics();
  const SceneDescription scene = SceneDescription::Make(SceneKind::kTwoPlanes, {});
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const Pose src = Pose::Identity();
    const Pose tgt = test::RandomPose(rng, 0.08, 0.3);
    const RelativeTransform rel = RelativePose(src, tgt);
    const RenderOutput render = RenderScene(scene, src, K);
    const FlowField flow = ComputeFlow(LiftDepth(render.depth, K), rel, K);
    const Pose inverse = rel.pose.Inverse();
    double worst = 0.0;
    int checked = 0;
    for (int y = 0; y < K.height; ++y) {
      for (int x = 0; x < K.width; ++x) {
        if (!flow.valid(x, y)) continue;
        const Eigen::Vector2d q = Eigen::Vector2d(x, y) + flow.vectors(x, y);
        if (q.x() < 0 || q.y() < 0 || q.x() > K.width - 1 || q.y() > K.height - 1) continue;
        // Depth at the displaced location comes from ray casting the target view.
        const RayHit hit = CastRay(scene, tgt, K, q.x(), q.y());
        if (hit.label != render.labels(x, y) || std::abs(hit.depth - flow.target_depth(x, y)) > 1e-6) continue;
        const auto back = Project(inverse.Apply(Unproject(q, hit.depth, K)), K);
        REQUIRE(back);
        worst = std::max(worst, (back->pixel - Eigen::Vector2d(x, y)).norm());
        ++checked;
      }
    }
    CHECK(checked > K.width * K.height / 2);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("dynamic mask: strict threshold") {
  FlowField a = FlowField::Uniform(5, 4, {1.0, -2.0});
  FlowField b = a;
  CHECK(CountSet(EstimateDynamicMask(a, b, 1.5).mask) == 0);

  b.vectors(2, 1) += Eigen::Vector2d(3.0, 0.0);   // 2 * tau
  b.vectors(4, 3) += Eigen::Vector2d(0.0, 1.5);   // exactly tau
  const DynamicMask m = EstimateDynamicMask(a, b, 1.5);
  CHECK(m.mask(2, 1) == 1);
  CHECK(m.mask(4, 3) == 0);
  CHECK(CountSet(m.mask) == 1);

  b.valid(2, 1) = 0;
  CHECK(CountSet(EstimateDynamicMask(a, b, 1.5).mask) == 0);
  CHECK_THROWS_AS(EstimateDynamicMask(a, FlowField::Uniform(4, 4, {0.0, 0.0})), InvalidArgument);
  CHECK_THROWS_AS(EstimateDynamicMask(a, b, -1.0), InvalidArgument);
}
