#pragma once

#include <optional>

#include <Eigen/Core>

#include "trajwarp/camera.hpp"
#include "trajwarp/grid.hpp"

namespace trajwarp {

/// Per-pixel z-depth. `values` keeps whatever was decoded (including
/// non-positive markers) so files round-trip; `valid` is authoritative.
struct DepthMap {
  Grid<double> values;
  Mask valid;

  /// Valid where the value is finite and strictly positive.
  static DepthMap FromValues(Grid<double> values);
  int width() const { return values.width(); }
  int height() const { return values.height(); }
};

enum class PointFrame { kSourceCamera, kWorld };

struct Pointmap {
  Grid<Eigen::Vector3d> points;
  Mask valid;
  PointFrame frame = PointFrame::kSourceCamera;

  int width() const { return points.width(); }
  int height() const { return points.height(); }
};

struct FlowField {
  Grid<Eigen::Vector2d> vectors;
  Mask valid;
  /// z of each source point in the target camera; meaningful where valid.
  Grid<double> target_depth;

  FlowField() = default;
  FlowField(int width, int height);

  int width() const { return vectors.width(); }
  int height() const { return vectors.height(); }

  /// All-valid flow with a constant vector and unit target depth.
  static FlowField Uniform(int width, int height, const Eigen::Vector2d& v);
};

struct DynamicMask {
  Mask mask;  // 1 = dynamic
};

/// Lift every valid depth pixel through the inverse pinhole. With a pose the
/// points are moved to world coordinates by pose^-1.
Pointmap LiftDepth(const DepthMap& depth, const Intrinsics& K, const std::optional<Pose>& pose = std::nullopt);

/// Flow induced by moving the source camera by `rel`:
///   f(u, v) = project(rel * G(u, v)) - (u, v).
/// World-frame pointmaps need `source_extrinsic` to reach the source camera.
FlowField ComputeFlow(const Pointmap& pointmap, const RelativeTransform& rel, const Intrinsics& K,
                      const std::optional<Pose>& source_extrinsic = std::nullopt);

/// Flow obtained by applying `to_target_camera` directly to the stored points.
/// ComputeFlow and the all-frame aggregation both go through this.
FlowField ProjectPointmap(const Pointmap& pointmap, const Pose& to_target_camera, const Intrinsics& K);

inline constexpr double kDefaultDynamicThreshold = 1.5;

/// Dynamic where both flows are valid and differ by strictly more than
/// `threshold` pixels.
DynamicMask EstimateDynamicMask(const FlowField& optical_flow, const FlowField& induced_flow,
                                double threshold = kDefaultDynamicThreshold);

}  // namespace trajwarp
