#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "support.hpp"
#include "trajwarp/errors.hpp"
#include "trajwarp/geometry.hpp"
#include "trajwarp/synth.hpp"
#include "trajwarp/warp.hpp"

using namespace trajwarp;

namespace {

Frame Gradient(int w, int h) {
  Frame f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f(x, y) = Rgb8{static_cast<std::uint8_t>(10 * x + 1), static_cast<std::uint8_t>(10 * y + 2),
                     static_cast<std::uint8_t>(x + y)};
    }
  }
  return f;
}

bool IsHoleConsistent(const WarpResult& w) {
  for (std::size_t i = 0; i < w.hole_mask.size(); ++i) {
    const double d = w.depth_buffer[i];
    if ((w.hole_mask[i] == 1) != std::isinf(d)) return false;
    if (!w.hole_mask[i] && !(d > 0.0 && std::isfinite(d))) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("forward warp: zero flow reproduces the frame") {
  const Frame f = Gradient(9, 7);
  for (SplatMode mode : {SplatMode::kNearest, SplatMode::kBilinear}) {
    const WarpResult w = ForwardWarp(f, FlowField::Uniform(9, 7, {0.0, 0.0}), mode);
    CHECK(w.image == f);
    CHECK(CountSet(w.hole_mask) == 0);
    CHECK(w.HoleFraction() == 0.0);
    CHECK(IsHoleConsistent(w));
  }
}

TEST_CASE("forward warp: nearer source wins") {
  Frame f(2, 1);
  f(0, 0) = Rgb8{10, 10, 10};
  f(1, 0) = Rgb8{20, 20, 20};
  FlowField flow(2, 1);
  flow.valid.values()[0] = flow.valid.values()[1] = 1;
  flow.vectors(0, 0) = {0.0, 0.0};
  flow.vectors(1, 0) = {-1.0, 0.0};
  flow.target_depth(0, 0) = 1.0;
  flow.target_depth(1, 0) = 2.0;
  WarpResult w = ForwardWarp(f, flow);
  CHECK(w.image(0, 0) == Rgb8{10, 10, 10});
  CHECK(w.depth_buffer(0, 0) == 1.0);
  CHECK(w.hole_mask(1, 0) == 1);

  // Swap depths: the second pixel is now in front.
  flow.target_depth(0, 0) = 2.0;
  flow.target_depth(1, 0) = 1.0;
  w = ForwardWarp(f, flow);
  CHECK(w.image(0, 0) == Rgb8{20, 20, 20});

  // Equal depth: the lower row-major index wins.
  flow.target_depth(0, 0) = flow.target_depth(1, 0) = 1.5;
  w = ForwardWarp(f, flow);
  CHECK(w.image(0, 0) == Rgb8{10, 10, 10});
}

TEST_CASE("forward warp: integer shift leaves holes on the left") {
  const Frame f = Gradient(4, 4);
  const WarpResult w = ForwardWarp(f, FlowField::Uniform(4, 4, {2.0, 0.0}));
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      if (x < 2) {
        CHECK(w.hole_mask(x, y) == 1);
        CHECK(w.image(x, y) == Rgb8{0, 0, 0});
      } else {
        CHECK(w.hole_mask(x, y) == 0);
        CHECK(w.image(x, y) == f(x - 2, y));
      }
    }
  }
  CHECK(w.HoleFraction() == 0.5);
  CHECK(IsHoleConsistent(w));
}

TEST_CASE("forward warp: rounding, bounds, invalid flow") {
  const Frame f = Gradient(3, 1);
  FlowField flow = FlowField::Uniform(3, 1, {0.5, 0.0});  // floor(x + 0.5): 0.5 -> 1
  flow.valid(2, 0) = 0;
  const WarpResult w = ForwardWarp(f, flow);
  CHECK(w.hole_mask(0, 0) == 1);
  CHECK(w.image(1, 0) == f(0, 0));
  CHECK(w.image(2, 0) == f(1, 0));
  CHECK_THROWS_AS(ForwardWarp(f, FlowField::Uniform(2, 1, {0.0, 0.0})), InvalidArgument);
}

TEST_CASE("forward warp: nearer plane wins every contested pixel") {
  const Intrinsics K = DefaultIntrinsics();
  const SceneDescription scene = SceneDescription::Make(SceneKind::kTwoPlanes, {});
  const RenderOutput src = RenderScene(scene, Pose::Identity(), K);
  for (double dx : {0.1, 0.25, -0.3}) {
    const RelativeTransform rel{Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(-dx, 0.0, 0.0))};
    const FlowField flow = ComputeFlow(LiftDepth(src.depth, K), rel, K);
    const WarpResult w = ForwardWarp(src.frame, flow);
    // Brute force: the minimum depth among all sources rounding to each target.
    Grid<double> best(K.width, K.height, std::numeric_limits<double>::infinity());
    for (int y = 0; y < K.height; ++y) {
      for (int x = 0; x < K.width; ++x) {
        if (!flow.valid(x, y)) continue;
        const Eigen::Vector2d q = Eigen::Vector2d(x, y) + flow.vectors(x, y);
        const int tx = static_cast<int>(std::floor(q.x() + 0.5)), ty = static_cast<int>(std::floor(q.y() + 0.5));
        if (!best.contains(tx, ty)) continue;
        best(tx, ty) = std::min(best(tx, ty), flow.target_depth(x, y));
      }
    }
    CHECK(w.depth_buffer == best);
  }
}

TEST_CASE("aggregate: a single frame equals the per-frame warp") {
  const Intrinsics K = DefaultIntrinsics();
  std::mt19937_64 rng(2);
  CameraTrajectory cam{K, {test::RandomPose(rng, 0.05, 0.2)}};
  const SyntheticScene s = MakeScene(SceneKind::kTexturedSphere, {}, 1, cam);
  const Pose& e = s.trajectory.poses[0];
  const RelativeTransform rel{test::RandomPose(rng, 0.1, 0.3)};
  const Pointmap pm = LiftDepth(s.depths[0], K, e);
  const std::vector<Pointmap> pms{pm};
  for (SplatMode mode : {SplatMode::kNearest, SplatMode::kBilinear}) {
    const WarpResult a = AggregateAllFrames(s.frames, pms, s.dynamic_masks, 0, ApplyRelative(e, rel), K, mode);
    const WarpResult b = ForwardWarp(s.frames[0], ComputeFlow(pm, rel, K, e), mode);
    CHECK(a.image == b.image);
    CHECK(a.hole_mask == b.hole_mask);
    CHECK(a.depth_buffer == b.depth_buffer);
  }
}

TEST_CASE("aggregate: dynamic pixels of other frames never contribute") {
  // 2x2 frames, identity cameras: every point lands on its own pixel.
  const Intrinsics K{2.0, 2.0, 1.0, 1.0, 2, 2};
  std::vector<Frame> frames{Frame(2, 2, Rgb8{1, 1, 1}), Frame(2, 2, Rgb8{2, 2, 2})};
  std::vector<DepthMap> depths{DepthMap::FromValues(Grid<double>(2, 2, 5.0)), DepthMap::FromValues(Grid<double>(2, 2, 5.0))};
  depths[1].values(0, 0) = 1.0;  // frame 1 is nearer at (0,0) and (1,1)
  depths[1].values(1, 1) = 1.0;
  depths[0].valid(1, 0) = 0;     // frame 0 has nothing at (1,0)
  std::vector<Pointmap> pms{LiftDepth(depths[0], K, Pose::Identity()), LiftDepth(depths[1], K, Pose::Identity())};
  std::vector<DynamicMask> masks{DynamicMask{Mask(2, 2, 0)}, DynamicMask{Mask(2, 2, 0)}};
  masks[1].mask(0, 0) = 1;
  const WarpResult w = AggregateAllFrames(frames, pms, masks, 0, Pose::Identity(), K);
  CHECK(w.image(0, 0) == Rgb8{1, 1, 1});  // dynamic in frame 1: excluded despite being nearer
  CHECK(w.image(1, 1) == Rgb8{2, 2, 2});  // static and nearer: wins
  CHECK(w.image(1, 0) == Rgb8{2, 2, 2});  // fills frame 0's gap
  CHECK(w.image(0, 1) == Rgb8{1, 1, 1});  // equal depth: frame t wins
  CHECK(CountSet(w.hole_mask) == 0);

  // Dynamic pixels of frame t itself are kept.
  const WarpResult w1 = AggregateAllFrames(frames, pms, masks, 1, Pose::Identity(), K);
  CHECK(w1.image(0, 0) == Rgb8{2, 2, 2});
}

TEST_CASE("aggregate: adding frames never adds holes") {
  const Intrinsics K = DefaultIntrinsics();
  const CameraTrajectory cam =
      PresetTrajectory(PresetKind::kTruck, {{"total_offset", 0.6}}, 5, CameraTrajectory{K, {Pose::Identity()}});
  const SyntheticScene s = MakeScene(SceneKind::kTwoPlanes, {}, 5, cam);
  std::vector<Pointmap> pms;
  for (int t = 0; t < 5; ++t) pms.push_back(LiftDepth(s.depths[static_cast<std::size_t>(t)], K, s.trajectory.poses[static_cast<std::size_t>(t)]));
  const Pose target = ApplyRelative(s.trajectory.poses[2], RelativeTransform{Pose(Eigen::Matrix3d::Identity(), {-0.2, 0.0, 0.0})});
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (std::size_t n = 1; n <= 5; ++n) {
    // Frames 2, then 2 plus increasingly many others.
    std::vector<Frame> f{s.frames[2]};
    std::vector<Pointmap> p{pms[2]};
    std::vector<DynamicMask> m{s.dynamic_masks[2]};
    for (std::size_t k = 0, added = 1; k < 5 && added < n; ++k) {
      if (k == 2) continue;
      f.push_back(s.frames[k]);
      p.push_back(pms[k]);
      m.push_back(s.dynamic_masks[k]);
      ++added;
    }
    const std::size_t holes = CountSet(AggregateAllFrames(f, p, m, 0, target, K).hole_mask);
    CHECK(holes <= previous);
    previous = holes;
  }
}

TEST_CASE("aggregate: argument validation") {
  const Intrinsics K{2.0, 2.0, 1.0, 1.0, 2, 2};
  std::vector<Frame> frames{Frame(2, 2)};
  const DepthMap d = DepthMap::FromValues(Grid<double>(2, 2, 1.0));
  std::vector<Pointmap> cam{LiftDepth(d, K)};
  std::vector<Pointmap> world{LiftDepth(d, K, Pose::Identity())};
  std::vector<DynamicMask> masks{DynamicMask{Mask(2, 2, 0)}};
  CHECK_THROWS_AS(AggregateAllFrames(frames, cam, masks, 0, Pose::Identity(), K), InvalidArgument);
  CHECK_THROWS_AS(AggregateAllFrames(frames, world, masks, 1, Pose::Identity(), K), InvalidArgument);
  std::vector<DynamicMask> none;
  CHECK_THROWS_AS(AggregateAllFrames(frames, world, none, 0, Pose::Identity(), K), InvalidArgument);
}

TEST_CASE("warp output is deterministic") {
  const Intrinsics K = DefaultIntrinsics();
  const SceneDescription scene = SceneDescription::Make(SceneKind::kTexturedSphere, {{"background_depth", 6.0}});
  const RenderOutput src = RenderScene(scene, Pose::Identity(), K);
  std::mt19937_64 rng(8);
  const RelativeTransform rel{test::RandomPose(rng, 0.15, 0.4)};
  const FlowField flow = ComputeFlow(LiftDepth(src.depth, K), rel, K);
  for (SplatMode mode : {SplatMode::kNearest, SplatMode::kBilinear}) {
    const WarpResult a = ForwardWarp(src.frame, flow, mode);
    const WarpResult b = ForwardWarp(src.frame, flow, mode);
    CHECK(a.image == b.image);
    CHECK(a.depth_buffer == b.depth_buffer);
    CHECK(IsHoleConsistent(a));
  }
}

TEST_CASE("backward sample: zero, integer and half-pixel flows") {
  ChannelGrid g(4, 3, 2, 0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (auto& v : g.values()) v = u(rng);

  SampleResult s = BackwardSample(g, FlowField::Uniform(4, 3, {0.0, 0.0}));
  CHECK(s.values.values().size() == g.values().size());
  CHECK(std::equal(s.values.values().begin(), s.values.values().end(), g.values().begin()));

  s = BackwardSample(g, FlowField::Uniform(4, 3, {-1.0, 0.0}));
  for (int y = 0; y < 3; ++y) {
    for (int c = 0; c < 2; ++c) {
      CHECK(s.values(0, y, c) == g(0, y, c));  // clamped border
      for (int x = 1; x < 4; ++x) CHECK(s.values(x, y, c) == g(x - 1, y, c));
    }
  }

  ChannelGrid row(2, 1, 1, 0.0);
  row(1, 0, 0) = 10.0;
  s = BackwardSample(row, FlowField::Uniform(2, 1, {0.5, 0.0}));
  CHECK(s.values(0, 0, 0) == 5.0);
  CHECK(s.values(1, 0, 0) == 10.0);

  FlowField bad = FlowField::Uniform(4, 3, {0.0, 0.0});
  bad.valid(1, 1) = 0;
  s = BackwardSample(g, bad);
  CHECK(s.valid(1, 1) == 0);
  CHECK(s.values(1, 1, 0) == 0.0);
  CHECK(s.values(1, 1, 1) == 0.0);
  CHECK_THROWS_AS(BackwardSample(g, FlowField::Uniform(3, 3, {0.0, 0.0})), InvalidArgument);
}
