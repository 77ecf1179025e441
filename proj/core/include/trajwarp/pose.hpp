#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "trajwarp/camera.hpp"
#include "trajwarp/geometry.hpp"

namespace trajwarp {

/// A 3D point in the source camera frame and where it was observed in the
/// target image.
struct Correspondence {
  Eigen::Vector3d point3d;
  Eigen::Vector2d pixel;
};

struct RansacConfig {
  double inlier_threshold = 2.0;  // pixels
  double confidence = 0.999;
  int max_iterations = 10000;
  int min_sample = 6;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct PnpResult {
  Pose pose;
  std::vector<int> inliers;  // ascending correspondence indices
  int iterations = 0;
};

/// Hypothesize-and-verify PnP: 6-point DLT with polar rotation extraction,
/// adaptive iteration bound, and a Gauss-Newton refit on the consensus set.
/// Deterministic for a fixed seed. Throws InvalidArgument on too few
/// correspondences and EstimationFailure when no model gathers min_sample
/// inliers.
PnpResult PnpRansac(std::span<const Correspondence> corrs, const Intrinsics& K, const RansacConfig& config);

/// Linear pose from >= 6 correspondences (no robustness). Throws
/// EstimationFailure on degenerate (near-planar or collinear) point sets.
Pose SolvePnpDlt(std::span<const Correspondence> corrs, const Intrinsics& K);

struct RefineReport {
  Pose pose;
  /// Sum of squared reprojection residuals, starting with the initial pose.
  std::vector<double> cost_history;
  int iterations = 0;
};

/// Gauss-Newton on the summed squared reprojection error with a left
/// so(3) x R^3 update. Stops when the step norm drops below 1e-10 or after 50
/// iterations; a step that raises the cost is halved until it does not.
RefineReport RefinePoseWithReport(const Pose& initial, std::span<const Correspondence> corrs, const Intrinsics& K);
Pose RefinePose(const Pose& initial, std::span<const Correspondence> corrs, const Intrinsics& K);

/// Reprojection error (pixels) of one correspondence; +inf behind the camera.
double ReprojectionError(const Pose& pose, const Correspondence& c, const Intrinsics& K);

struct PixelMatch {
  Eigen::Vector2d source;
  Eigen::Vector2d target;
};

/// Lift each source pixel through its depth, then run PnpRansac. The result is
/// the source -> target relative transform.
PnpResult PoseFromDepthMatches(const DepthMap& depth_src, std::span<const PixelMatch> matches, const Intrinsics& K,
                               const RansacConfig& config);

}  // namespace trajwarp
