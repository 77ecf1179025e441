#include "trajwarp/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "trajwarp/errors.hpp"

namespace trajwarp {

void Intrinsics::Validate() const {
  if (!(fx > 0.0)) throw InvariantViolation("intrinsics.fx", "fx > 0", "fx = " + std::to_string(fx));
  if (!(fy > 0.0)) throw InvariantViolation("intrinsics.fy", "fy > 0", "fy = " + std::to_string(fy));
  if (width <= 0 || height <= 0) {
    throw InvariantViolation("intrinsics.width", "width, height > 0",
                             std::to_string(width) + "x" + std::to_string(height));
  }
  if (!(cx >= 0.0 && cx < width)) {
    throw InvariantViolation("intrinsics.cx", "0 <= cx < width", "cx = " + std::to_string(cx));
  }
  if (!(cy >= 0.0 && cy < height)) {
    throw InvariantViolation("intrinsics.cy", "0 <= cy < height", "cy = " + std::to_string(cy));
  }
}

Eigen::Matrix3d Intrinsics::Matrix() const {
  Eigen::Matrix3d K;
  K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return K;
}

void Pose::ValidateRotation(const Eigen::Matrix3d& rotation, const std::string& field) {
  if (!rotation.allFinite()) throw InvariantViolation(field, "R finite", "non-finite entry");
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kTolerance) {
    throw InvariantViolation(field, "R^T R = I", "max deviation " + std::to_string(ortho));
  }
  const double det = rotation.determinant();
  if (std::abs(det - 1.0) > kTolerance) {
    throw InvariantViolation(field, "det(R) = +1", "det = " + std::to_string(det));
  }
}

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  ValidateRotation(rotation, "pose.R");
  if (!translation.allFinite()) throw InvariantViolation("pose.t", "t finite", "non-finite entry");
}

Pose Pose::Inverse() const {
  const Eigen::Matrix3d rt = rotation_.transpose();
  return Pose(rt, -rt * translation_, Unchecked{});
}

Pose Pose::operator*(const Pose& rhs) const {
  return Pose(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_, Unchecked{});
}

std::optional<Projection> Project(const Eigen::Vector3d& point_cam, const Intrinsics& K) {
  const double z = point_cam.z();
  if (!(z > kMinProjectDepth)) return std::nullopt;
  return Projection{Eigen::Vector2d(K.fx * point_cam.x() / z + K.cx, K.fy * point_cam.y() / z + K.cy), z};
}

Eigen::Vector3d Unproject(const Eigen::Vector2d& pixel, double depth, const Intrinsics& K) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw InvalidArgument("Unproject: depth must be positive and finite, got " + std::to_string(depth));
  }
  return {(pixel.x() - K.cx) * depth / K.fx, (pixel.y() - K.cy) * depth / K.fy, depth};
}

RelativeTransform RelativePose(const Pose& source, const Pose& target) {
  return RelativeTransform{target * source.Inverse()};
}

Pose ApplyRelative(const Pose& source, const RelativeTransform& rel) { return rel.pose * source; }

Eigen::Vector3d CameraDisplacement(const RelativeTransform& rel) { return rel.pose.Center(); }

namespace {

Eigen::Quaterniond ToQuaternion(const Eigen::Matrix3d& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  return q;
}

// Shortest-arc slerp; falls back to normalized lerp for nearly parallel inputs.
Eigen::Quaterniond Slerp(Eigen::Quaterniond a, Eigen::Quaterniond b, double s) {
  double d = a.dot(b);
  if (d < 0.0) {
    b.coeffs() = -b.coeffs();
    d = -d;
  }
  if (d > 1.0 - 1e-14) {
    Eigen::Quaterniond q;
    q.coeffs() = (1.0 - s) * a.coeffs() + s * b.coeffs();
    return q.normalized();
  }
  const double theta = std::acos(std::min(1.0, d));
  const double sin_theta = std::sin(theta);
  const double wa = std::sin((1.0 - s) * theta) / sin_theta;
  const double wb = std::sin(s * theta) / sin_theta;
  Eigen::Quaterniond q;
  q.coeffs() = wa * a.coeffs() + wb * b.coeffs();
  return q.normalized();
}

}  // namespace

std::vector<Pose> InterpolateTrajectory(std::span<const Keyframe> keyframes, int frame_count) {
  if (frame_count < 1) throw InvalidArgument("InterpolateTrajectory: frame count must be >= 1");
  if (keyframes.empty()) throw InvalidArgument("InterpolateTrajectory: at least one keyframe required");
  for (std::size_t i = 0; i < keyframes.size(); ++i) {
    const int idx = keyframes[i].frame_index;
    if (idx < 0 || idx >= frame_count) {
      throw InvalidArgument("InterpolateTrajectory: keyframe index " + std::to_string(idx) +
                            " outside [0, " + std::to_string(frame_count - 1) + "]");
    }
    if (i > 0 && idx <= keyframes[i - 1].frame_index) {
      throw InvalidArgument("InterpolateTrajectory: keyframe indices must be strictly increasing (index " +
                            std::to_string(idx) + ")");
    }
  }

  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(frame_count));
  std::size_t seg = 0;
  for (int f = 0; f < frame_count; ++f) {
    if (f <= keyframes.front().frame_index) {
      poses.push_back(keyframes.front().pose);
      continue;
    }
    if (f >= keyframes.back().frame_index) {
      poses.push_back(keyframes.back().pose);
      continue;
    }
    while (keyframes[seg + 1].frame_index < f) ++seg;
    const Keyframe& a = keyframes[seg];
    const Keyframe& b = keyframes[seg + 1];
    if (f == a.frame_index) {
      poses.push_back(a.pose);
      continue;
    }
    if (f == b.frame_index) {
      poses.push_back(b.pose);
      continue;
    }
    const double s = static_cast<double>(f - a.frame_index) / static_cast<double>(b.frame_index - a.frame_index);
    const Eigen::Quaterniond q = Slerp(ToQuaternion(a.pose.rotation()), ToQuaternion(b.pose.rotation()), s);
    const Eigen::Vector3d t = (1.0 - s) * a.pose.translation() + s * b.pose.translation();
    poses.emplace_back(q.toRotationMatrix(), t);
  }
  return poses;
}

PresetKind ParsePresetKind(const std::string& name) {
  if (name == "orbit") return PresetKind::kOrbit;
  if (name == "dolly") return PresetKind::kDolly;
  if (name == "truck") return PresetKind::kTruck;
  if (name == "arc") return PresetKind::kArc;
  if (name == "static") return PresetKind::kStatic;
  throw InvalidArgument("unknown trajectory preset '" + name + "' (expected orbit, dolly, truck, arc, static)");
}

std::string ToString(PresetKind kind) {
  switch (kind) {
    case PresetKind::kOrbit: return "orbit";
    case PresetKind::kDolly: return "dolly";
    case PresetKind::kTruck: return "truck";
    case PresetKind::kArc: return "arc";
    case PresetKind::kStatic: return "static";
  }
  return "unknown";
}

Eigen::Matrix3d RotationY(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Eigen::Matrix3d r;
  r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return r;
}

Eigen::Matrix3d RotationX(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Eigen::Matrix3d r;
  r << 1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c;
  return r;
}

Eigen::Matrix3d RotationZ(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Eigen::Matrix3d ExpSO3(const Eigen::Vector3d& omega) {
  const double angle = omega.norm();
  if (angle < 1e-300) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

double RotationAngle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  // atan2 form stays accurate for tiny angles where acos of the trace loses digits.
  const Eigen::Matrix3d d = a.transpose() * b;
  const Eigen::Vector3d axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (d.trace() - 1.0));
}

namespace {

double Require(const PresetParams& params, const std::string& key, PresetKind kind) {
  auto it = params.find(key);
  if (it == params.end()) {
    throw InvalidArgument("preset '" + ToString(kind) + "' requires parameter '" + key + "'");
  }
  if (!std::isfinite(it->second)) {
    throw InvalidArgument("preset parameter '" + key + "' must be finite");
  }
  return it->second;
}

// Camera placed on a circle of `radius` around the look-at point (0, 0, radius)
// of the source camera, rotated by `rot` about that point.
RelativeTransform AboutLookAt(const Eigen::Matrix3d& camera_to_source, double radius) {
  const Eigen::Vector3d look_at(0.0, 0.0, radius);
  const Eigen::Vector3d center = look_at - camera_to_source * look_at;
  const Eigen::Matrix3d r = camera_to_source.transpose();
  return RelativeTransform{Pose(r, -r * center)};
}

}  // namespace

std::vector<RelativeTransform> PresetRelativeTransforms(PresetKind kind, const PresetParams& params,
                                                        int frame_count) {
  if (frame_count < 1) throw InvalidArgument("preset trajectory: frame count must be >= 1");
  std::vector<RelativeTransform> rels;
  rels.reserve(static_cast<std::size_t>(frame_count));
  const double denom = frame_count > 1 ? static_cast<double>(frame_count - 1) : 1.0;

  switch (kind) {
    case PresetKind::kStatic:
      rels.assign(static_cast<std::size_t>(frame_count), RelativeTransform{Pose::Identity()});
      break;
    case PresetKind::kTruck:
    case PresetKind::kDolly: {
      const double total = Require(params, "total_offset", kind);
      const Eigen::Vector3d axis = kind == PresetKind::kTruck ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitZ();
      for (int f = 0; f < frame_count; ++f) {
        const double offset = total * (f / denom);
        rels.push_back(RelativeTransform{Pose(Eigen::Matrix3d::Identity(), -offset * axis)});
      }
      break;
    }
    case PresetKind::kOrbit:
    case PresetKind::kArc: {
      const double radius = Require(params, "radius", kind);
      const double degrees = Require(params, "total_degrees", kind);
      if (!(radius > 0.0)) throw InvalidArgument("preset parameter 'radius' must be > 0");
      for (int f = 0; f < frame_count; ++f) {
        const double angle = degrees * std::numbers::pi / 180.0 * (f / denom);
        // Positive orbit swings the camera toward +x; positive arc raises it (-y).
        const Eigen::Matrix3d cam_to_src = kind == PresetKind::kOrbit ? RotationY(-angle) : RotationX(-angle);
        rels.push_back(AboutLookAt(cam_to_src, radius));
      }
      break;
    }
  }
  return rels;
}

CameraTrajectory PresetTrajectory(PresetKind kind, const PresetParams& params, int frame_count,
                                  const CameraTrajectory& base) {
  if (base.poses.size() != 1 && base.poses.size() != static_cast<std::size_t>(frame_count)) {
    throw InvalidArgument("preset trajectory: base must hold 1 or " + std::to_string(frame_count) +
                          " poses, got " + std::to_string(base.poses.size()));
  }
  const auto rels = PresetRelativeTransforms(kind, params, frame_count);
  CameraTrajectory out{base.intrinsics, {}};
  out.poses.reserve(rels.size());
  for (int f = 0; f < frame_count; ++f) {
    const Pose& src = base.poses.size() == 1 ? base.poses.front() : base.poses[static_cast<std::size_t>(f)];
    out.poses.push_back(kind == PresetKind::kStatic ? src : ApplyRelative(src, rels[static_cast<std::size_t>(f)]));
  }
  return out;
}

}  // namespace trajwarp
