#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace trajwarp {

/// Zero-skew pinhole intrinsics shared by every frame of a video.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws InvariantViolation unless fx, fy > 0 and the principal point lies
  /// inside the image.
  void Validate() const;
  Eigen::Matrix3d Matrix() const;

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Rigid world-to-camera transform: x_cam = R * x_world + t.
/// Camera axes are +x right, +y down, +z forward.
class Pose {
 public:
  static constexpr double kTolerance = 1e-9;

  Pose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

  /// Validates orthonormality and det(R) = +1 within kTolerance.
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Pose Identity() { return Pose(); }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Vector3d Apply(const Eigen::Vector3d& x) const { return rotation_ * x + translation_; }
  Pose Inverse() const;

  /// (*this) after `rhs`: x -> this(rhs(x)).
  Pose operator*(const Pose& rhs) const;

  /// Camera center in world coordinates, -R^T t.
  Eigen::Vector3d Center() const { return -rotation_.transpose() * translation_; }

  /// Throws InvariantViolation naming `field` if R is not a proper rotation.
  static void ValidateRotation(const Eigen::Matrix3d& rotation, const std::string& field);

 private:
  struct Unchecked {};
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation, Unchecked)
      : rotation_(rotation), translation_(translation) {}

  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// Maps source-camera coordinates to target-camera coordinates for one frame.
struct RelativeTransform {
  Pose pose;
};

struct CameraTrajectory {
  Intrinsics intrinsics;
  std::vector<Pose> poses;
};

struct Projection {
  Eigen::Vector2d pixel;
  double depth;
};

/// Points closer than this to the image plane do not project.
inline constexpr double kMinProjectDepth = 1e-6;

/// Pinhole projection; nullopt when z <= kMinProjectDepth.
std::optional<Projection> Project(const Eigen::Vector3d& point_cam, const Intrinsics& K);

/// Inverse pinhole at z-depth `depth`. Throws InvalidArgument unless depth > 0.
Eigen::Vector3d Unproject(const Eigen::Vector2d& pixel, double depth, const Intrinsics& K);

/// M with x_target_cam = M * x_source_cam, i.e. target * source^-1.
RelativeTransform RelativePose(const Pose& source, const Pose& target);

/// Target extrinsic reached by applying `rel` to `source`.
Pose ApplyRelative(const Pose& source, const RelativeTransform& rel);

/// Position of the target camera center expressed in the source camera frame.
Eigen::Vector3d CameraDisplacement(const RelativeTransform& rel);

struct Keyframe {
  int frame_index;
  Pose pose;
};

/// Slerp rotations (shortest arc) and lerp translations between keyframes,
/// uniformly in frame index. Frames outside the keyframe span hold the nearest
/// keyframe. Keyframe poses are reproduced exactly.
std::vector<Pose> InterpolateTrajectory(std::span<const Keyframe> keyframes, int frame_count);

enum class PresetKind { kOrbit, kDolly, kTruck, kArc, kStatic };

PresetKind ParsePresetKind(const std::string& name);
std::string ToString(PresetKind kind);

using PresetParams = std::map<std::string, double>;

/// Per-frame relative transforms of a preset camera move, ramped linearly from
/// identity at frame 0 to the full move at frame T-1.
///   orbit: radius, total_degrees  (yaw about a look-at point `radius` ahead)
///   arc:   radius, total_degrees  (elevation about the same look-at point)
///   dolly: total_offset           (along +z)
///   truck: total_offset           (along +x)
///   static: none
std::vector<RelativeTransform> PresetRelativeTransforms(PresetKind kind, const PresetParams& params,
                                                        int frame_count);

/// Preset moves composed onto `base`. `base` holds either one pose (broadcast)
/// or exactly `frame_count` poses.
CameraTrajectory PresetTrajectory(PresetKind kind, const PresetParams& params, int frame_count,
                                  const CameraTrajectory& base);

/// Rotation of `radians` about the y (down) axis; positive turns +z toward +x.
Eigen::Matrix3d RotationY(double radians);
Eigen::Matrix3d RotationX(double radians);
Eigen::Matrix3d RotationZ(double radians);

/// Rodrigues exponential of an axis-angle vector.
Eigen::Matrix3d ExpSO3(const Eigen::Vector3d& omega);

/// Geodesic angle between two rotations, radians.
double RotationAngle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

}  // namespace trajwarp
