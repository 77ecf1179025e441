#pragma once

#include <map>
#include <string>
#include <vector>

#include "trajwarp/camera.hpp"
#include "trajwarp/geometry.hpp"
#include "trajwarp/warp.hpp"

namespace trajwarp {

enum class SceneKind { kCheckerPlane, kTwoPlanes, kTexturedSphere, kMovingBox };

SceneKind ParseSceneKind(const std::string& name);
std::string ToString(SceneKind kind);

using SceneParams = std::map<std::string, double>;

/// Surface labels reported by the ray caster.
enum SurfaceLabel : int {
  kLabelNone = 0,
  kLabelBackground = 1,  // checker plane, far plane, or box backdrop
  kLabelNearPlane = 2,
  kLabelSphere = 3,
  kLabelBox = 4,
};

/// Closed-form scene geometry. Every parameter has a default; `params` holds
/// the fully resolved set after construction.
///   checker_plane:   depth, period
///   two_planes:      near_depth, far_depth, near_half_width, near_center_x, period
///   textured_sphere: radius, center_depth, background_depth (0 = none), period
///   moving_box:      background_depth, box_depth, box_size, start_x, start_y,
///                    velocity_x, velocity_y, velocity_z, period
/// All planes are z = const in world coordinates. Lengths are scene units;
/// `period` is the texture period in scene units.
struct SceneDescription {
  SceneKind kind = SceneKind::kCheckerPlane;
  SceneParams params;

  static SceneDescription Make(SceneKind kind, const SceneParams& overrides);
  double Param(const std::string& key) const;
};

struct SyntheticScene {
  SceneDescription description;
  std::vector<Frame> frames;
  std::vector<DepthMap> depths;
  CameraTrajectory trajectory;
  std::vector<DynamicMask> dynamic_masks;
};

struct RenderOutput {
  Frame frame;
  DepthMap depth;
  Grid<int> labels;
};

/// Default desk-scale camera: 128 x 96, fx = fy = 110, principal point at the
/// image center, identity pose.
Intrinsics DefaultIntrinsics();
inline constexpr int kDefaultFrameCount = 12;

/// Ray-cast `T` frames along `camera` (one pose broadcast, or T poses).
/// Throws InvalidArgument on unknown or invalid parameters.
SyntheticScene MakeScene(SceneKind kind, const SceneParams& params, int frame_count, const CameraTrajectory& camera);

/// Analytic render at `time_index` (object motion is a function of time).
RenderOutput RenderScene(const SceneDescription& scene, const Pose& pose, const Intrinsics& K, int time_index = 0);

/// Nearest hit along the ray through continuous pixel (u, v). Returns the
/// z-depth in the camera (or +inf) and the label.
struct RayHit {
  double depth;
  int label;
  Eigen::Vector3d world_point;
};
RayHit CastRay(const SceneDescription& scene, const Pose& pose, const Intrinsics& K, double u, double v,
               int time_index = 0);

/// Target pixels whose visible surface point cannot be seen from the source
/// view (occluded there or outside the source image). Computed by ray casting
/// only; independent of any warping code.
Mask AnalyticDisocclusion(const SceneDescription& scene, const Pose& source, const Pose& target, const Intrinsics& K,
                          int time_index = 0);

/// Flow induced on the plane z_src = plane_depth (fronto-parallel in the
/// source camera) by the homography K (R + t n^T / d) K^-1 of the relative
/// motion source -> target, n = (0, 0, 1). Throws InvalidArgument for a plane
/// at or behind the camera.
FlowField AnalyticPlaneFlow(double plane_depth, const Pose& source, const Pose& target, const Intrinsics& K);

}  // namespace trajwarp
