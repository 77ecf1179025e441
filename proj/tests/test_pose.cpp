#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "support.hpp"
#include "trajwarp/errors.hpp"
#include "trajwarp/pose.hpp"
#include "trajwarp/synth.hpp"

using namespace trajwarp;
using test::MaxAbs;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Points visible in the source camera, observed exactly in the target.
std::vector<Correspondence> Exact(const Pose& truth, const Intrinsics& K, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, K.width - 1.0), v(0.0, K.height - 1.0), d(2.0, 8.0);
  std::vector<Correspondence> out;
  while (static_cast<int>(out.size()) < n) {
    const Eigen::Vector3d X = Unproject({u(rng), v(rng)}, d(rng), K);
    const auto p = Project(truth.Apply(X), K);
    if (!p) continue;
    out.push_back({X, p->pixel});
  }
  return out;
}

double Cost(const Pose& pose, std::span<const Correspondence> corrs, const Intrinsics& K) {
  double sum = 0.0;
  for (const auto& c : corrs) sum += std::pow(ReprojectionError(pose, c, K), 2);
  return sum;
}

}  // namespace

TEST_CASE("config validation") {
  RansacConfig c;
  CHECK_NOTHROW(c.Validate());
  c.confidence = 1.0;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
  c = {};
  c.inlier_threshold = 0.0;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
  c = {};
  c.min_sample = 5;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
}

TEST_CASE("DLT: six exact correspondences") {
  const Intrinsics K = test::SmallIntrinsics();
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose truth = test::RandomPose(rng, 0.3, 0.5);
    const auto corrs = Exact(truth, K, 6, rng);
    const Pose p = SolvePnpDlt(corrs, K);
    CHECK(RotationAngle(p.rotation(), truth.rotation()) < 1e-6);
    CHECK((p.translation() - truth.translation()).norm() < 1e-6);

    RansacConfig config;
    config.seed = static_cast<std::uint64_t>(trial);
    const PnpResult r = PnpRansac(corrs, K, config);
    CHECK(RotationAngle(r.pose.rotation(), truth.rotation()) < 1e-6);
    CHECK((r.pose.translation() - truth.translation()).norm() < 1e-6);
    CHECK(r.inliers.size() == 6);
  }
}

TEST_CASE("DLT: coplanar points are rejected as degenerate") {
  const Intrinsics K = test::SmallIntrinsics();
  std::vector<Correspondence> corrs;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 127.0), v(0.0, 95.0);
  for (int i = 0; i < 12; ++i) {
    const Eigen::Vector3d X = Unproject({u(rng), v(rng)}, 4.0, K);
    corrs.push_back({X, Project(X, K)->pixel});
  }
  CHECK_THROWS_AS(SolvePnpDlt(corrs, K), EstimationFailure);
}

TEST_CASE("RANSAC: too few correspondences") {
  const Intrinsics K = test::SmallIntrinsics();
  std::mt19937_64 rng(2);
  const auto corrs = Exact(Pose::Identity(), K, 5, rng);
  CHECK_THROWS_AS(PnpRansac(corrs, K, RansacConfig{}), InvalidArgument);
}

TEST_CASE("RANSAC: pure outliers fail to reach consensus") {
  const Intrinsics K = test::SmallIntrinsics();
  std::mt19937_64 rng(3);
  auto corrs = Exact(Pose::Identity(), K, 40, rng);
  std::uniform_real_distribution<double> u(0.0, 127.0), v(0.0, 95.0);
  for (auto& c : corrs) c.pixel = {u(rng), v(rng)};
  RansacConfig config;
  config.inlier_threshold = 0.01;
  config.min_sample = 30;
  config.max_iterations = 200;
  CHECK_THROWS_AS(PnpRansac(corrs, K, config), EstimationFailure);
}

TEST_CASE("RANSAC: contamination, inlier consistency, determinism") {
  const Intrinsics K = test::SmallIntrinsics();
  std::mt19937_64 rng(5);
  const Pose truth = test::RandomPose(rng, 0.2, 0.6);
  auto corrs = Exact(truth, K, 140, rng);
  std::uniform_real_distribution<double> u(0.0, 127.0), v(0.0, 95.0), d(2.0, 8.0);
  std::set<int> outliers;
  while (corrs.size() < 200) {
    const Eigen::Vector3d X = Unproject({u(rng), v(rng)}, d(rng), K);
    const auto p = Project(truth.Apply(X), K);
    const Eigen::Vector2d px(u(rng), v(rng));
    if (p && (p->pixel - px).norm() < 10.0) continue;
    outliers.insert(static_cast<int>(corrs.size()));
    corrs.push_back({X, px});
  }
  RansacConfig config;
  config.seed = 99;
  const PnpResult a = PnpRansac(corrs, K, config);
  const PnpResult b = PnpRansac(corrs, K, config);
  CHECK(a.inliers == b.inliers);
  CHECK(a.pose.rotation() == b.pose.rotation());
  CHECK(a.pose.translation() == b.pose.translation());
  CHECK(RotationAngle(a.pose.rotation(), truth.rotation()) < 0.1 * kDeg);
  for (int i : a.inliers) {
    CHECK(outliers.count(i) == 0);
    CHECK(ReprojectionError(a.pose, corrs[static_cast<std::size_t>(i)], K) < config.inlier_threshold);
  }
  CHECK(a.inliers.size() == 140);
  CHECK(std::is_sorted(a.inliers.begin(), a.inliers.end()));
}

TEST_CASE("refine: zero-residual fixed point") {
  const Intrinsics K = test::SmallIntrinsics();
  std::mt19937_64 rng(6);
  const Pose truth = test::RandomPose(rng, 0.3, 0.5);
  const auto corrs = Exact(truth, K, 20, rng);
  const Pose p = RefinePose(truth, corrs, K);
  CHECK(MaxAbs(p.rotation() - truth.rotation()) < 1e-12);
  CHECK(MaxAbs(p.translation() - truth.translation()) < 1e-12);
}

TEST_CASE("refine: recovers a one degree perturbation, cost never rises") {
  const Intrinsics K = test::SmallIntrinsics();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Pose truth = test::RandomPose(rng, 0.3, 0.5);
    const auto corrs = Exact(truth, K, 20, rng);
    const Eigen::Vector3d axis = test::RandomAxisAngle(rng, 1.0).normalized();
    const Pose start(ExpSO3(axis * kDeg) * truth.rotation(), truth.translation());
    const RefineReport r = RefinePoseWithReport(start, corrs, K);
    CHECK(RotationAngle(r.pose.rotation(), truth.rotation()) < 1e-8);
    REQUIRE(r.cost_history.size() >= 2);
    CHECK(r.cost_history.front() == doctest::Approx(Cost(start, corrs, K)));
    for (std::size_t i = 1; i < r.cost_history.size(); ++i) CHECK(r.cost_history[i] <= r.cost_history[i - 1]);
    CHECK(r.iterations <= 50);
  }
}

TEST_CASE("refine: noisy pixels reach the noise floor") {
  const Intrinsics K = test::SmallIntrinsics();
  const double sigma = 0.5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const Pose truth = test::RandomPose(rng, 0.3, 0.5);
    auto corrs = Exact(truth, K, 100, rng);
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& c : corrs) c.pixel += Eigen::Vector2d(noise(rng), noise(rng));
    const Pose p = RefinePose(truth, corrs, K);
    // RMS over the 2N residual coordinates.
    const double rms = std::sqrt(Cost(p, corrs, K) / (2.0 * corrs.size()));
    CHECK(rms <= 1.2 * sigma);
  }
}

TEST_CASE("refine: too few points or a degenerate system") {
  const Intrinsics K = test::SmallIntrinsics();
  std::mt19937_64 rng(8);
  const auto two = Exact(Pose::Identity(), K, 2, rng);
  CHECK_THROWS_AS(RefinePose(Pose::Identity(), two, K), InvalidArgument);
  // Three copies of one point: rank-deficient normal equations.
  std::vector<Correspondence> same(3, Exact(Pose::Identity(), K, 1, rng)[0]);
  CHECK_THROWS_AS(RefinePose(Pose::Identity(), same, K), EstimationFailure);
}

TEST_CASE("depth matches: identity motion") {
  const Intrinsics K = test::SmallIntrinsics();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(1.0, 9.0);
  Grid<double> values(128, 96, 0.0);
  for (auto& v : values.values()) v = d(rng);
  const DepthMap depth = DepthMap::FromValues(values);
  std::vector<PixelMatch> matches;
  std::uniform_int_distribution<int> u(0, 127), v(0, 95);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d p(u(rng), v(rng));
    matches.push_back({p, p});
  }
  const PnpResult r = PoseFromDepthMatches(depth, matches, K, RansacConfig{});
  CHECK(RotationAngle(r.pose.rotation(), Eigen::Matrix3d::Identity()) < 1e-6);
  CHECK(r.pose.translation().norm() < 1e-6);
}

TEST_CASE("depth matches: known motion on a synthetic scene") {
  const Intrinsics K = DefaultIntrinsics();
  const SceneDescription scene = SceneDescription::Make(SceneKind::kTexturedSphere, {{"background_depth", 7.0}});
  const RenderOutput src = RenderScene(scene, Pose::Identity(), K);
  std::mt19937_64 rng(10);
  const Pose rel(ExpSO3(Eigen::Vector3d(0.02, -0.05, 0.01)), Eigen::Vector3d(-0.3, 0.05, 0.1));
  std::vector<PixelMatch> matches;
  std::uniform_int_distribution<int> u(0, K.width - 1), v(0, K.height - 1);
  while (matches.size() < 150) {
    const Eigen::Vector2d p(u(rng), v(rng));
    const double z = src.depth.values(static_cast<int>(p.x()), static_cast<int>(p.y()));
    const auto q = Project(rel.Apply(Unproject(p, z, K)), K);
    if (q) matches.push_back({p, q->pixel});
  }
  const PnpResult r = PoseFromDepthMatches(src.depth, matches, K, RansacConfig{});
  CHECK(RotationAngle(r.pose.rotation(), rel.rotation()) < 0.1 * kDeg);
  CHECK((r.pose.translation() - rel.translation()).norm() < 0.005 * rel.translation().norm());
}

TEST_CASE("depth matches: only invalid depth") {
  const Intrinsics K = test::SmallIntrinsics();
  const DepthMap depth = DepthMap::FromValues(Grid<double>(128, 96, 0.0));
  std::vector<PixelMatch> matches(10, PixelMatch{{3.0, 4.0}, {3.0, 4.0}});
  CHECK_THROWS_AS(PoseFromDepthMatches(depth, matches, K, RansacConfig{}), InvalidArgument);
}
