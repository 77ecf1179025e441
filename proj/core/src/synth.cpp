#include "trajwarp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "trajwarp/errors.hpp"

namespace trajwarp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

const std::map<std::string, double>& Defaults(SceneKind kind) {
  static const std::map<std::string, double> checker = {{"depth", 5.0}, {"period", 1.0}};
  static const std::map<std::string, double> two_planes = {{"near_depth", 2.0},      {"far_depth", 4.0},
                                                           {"near_half_width", 0.4}, {"near_center_x", 0.0},
                                                           {"period", 1.0}};
  static const std::map<std::string, double> sphere = {
      {"radius", 1.0}, {"center_depth", 4.0}, {"background_depth", 0.0}, {"period", 0.5}};
  static const std::map<std::string, double> box = {{"background_depth", 5.0}, {"box_depth", 3.0},
                                                    {"box_size", 0.6},         {"start_x", -0.6},
                                                    {"start_y", 0.0},          {"velocity_x", 0.1},
                                                    {"velocity_y", 0.0},       {"velocity_z", 0.0},
                                                    {"period", 1.0}};
  switch (kind) {
    case SceneKind::kCheckerPlane: return checker;
    case SceneKind::kTwoPlanes: return two_planes;
    case SceneKind::kTexturedSphere: return sphere;
    case SceneKind::kMovingBox: return box;
  }
  return checker;
}

// Smoothed checker in [-1, 1]; tanh(sin) keeps it band-limited.
double Checker(double a, double b, double period) {
  constexpr double kSharpness = 1.0;
  const double norm = std::tanh(kSharpness) * std::tanh(kSharpness);
  return std::tanh(kSharpness * std::sin(kTwoPi * a / period)) *
         std::tanh(kSharpness * std::sin(kTwoPi * b / period)) / norm;
}

std::uint8_t Quantize(double v) { return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0)); }

// Closed-form surface color from 2D surface coordinates and a per-surface tint.
Rgb8 Texture(double a, double b, double period, int label) {
  const double c = Checker(a, b, period);
  const double stripe = std::sin(kTwoPi * (a + 0.5 * b) / (1.7 * period));
  double r = 128.0 + 90.0 * c;
  double g = 128.0 + 50.0 * stripe;
  double bl = 128.0 - 60.0 * c;
  switch (label) {
    case kLabelNearPlane:
      r = 200.0 + 40.0 * c;
      g = 90.0 + 40.0 * stripe;
      bl = 60.0;
      break;
    case kLabelSphere:
      g = 160.0 + 70.0 * c;
      break;
    case kLabelBox:
      r = 60.0 + 30.0 * c;
      g = 70.0 + 30.0 * stripe;
      bl = 210.0 + 30.0 * c;
      break;
    default:
      break;
  }
  return Rgb8{Quantize(r), Quantize(g), Quantize(bl)};
}

struct Ray {
  Eigen::Vector3d origin;     // camera center, world
  Eigen::Vector3d direction;  // world direction whose camera-frame z is 1
};

Ray MakeRay(const Pose& pose, const Intrinsics& K, double u, double v) {
  const Eigen::Vector3d d_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
  return Ray{pose.Center(), pose.rotation().transpose() * d_cam};
}

struct Candidate {
  double s = kInf;
  int label = kLabelNone;
};

void Consider(Candidate& best, double s, int label) {
  if (s > kMinProjectDepth && s < best.s) {
    best.s = s;
    best.label = label;
  }
}

// z = depth plane; returns ray parameter (camera z-depth) or inf.
double HitPlaneZ(const Ray& ray, double depth) {
  if (ray.direction.z() == 0.0) return kInf;
  const double s = (depth - ray.origin.z()) / ray.direction.z();
  return s > 0.0 ? s : kInf;
}

double HitSphere(const Ray& ray, const Eigen::Vector3d& center, double radius) {
  const Eigen::Vector3d oc = ray.origin - center;
  const double a = ray.direction.squaredNorm();
  const double b = 2.0 * oc.dot(ray.direction);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  // Numerically stable pair of roots.
  const double q = -0.5 * (b + std::copysign(sq, b));
  double s0 = q / a;
  double s1 = q != 0.0 ? c / q : s0;
  if (s0 > s1) std::swap(s0, s1);
  if (s0 > 0.0) return s0;
  if (s1 > 0.0) return s1;
  return kInf;
}

double HitBox(const Ray& ray, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double tmin = -kInf, tmax = kInf;
  for (int i = 0; i < 3; ++i) {
    const double d = ray.direction[i];
    if (d == 0.0) {
      if (ray.origin[i] < lo[i] || ray.origin[i] > hi[i]) return kInf;
      continue;
    }
    double t0 = (lo[i] - ray.origin[i]) / d;
    double t1 = (hi[i] - ray.origin[i]) / d;
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
  }
  if (tmax < tmin || tmax <= 0.0) return kInf;
  return tmin > 0.0 ? tmin : tmax;
}

Eigen::Vector3d BoxCenter(const SceneDescription& scene, int time_index) {
  const double size = scene.Param("box_size");
  return Eigen::Vector3d(scene.Param("start_x") + scene.Param("velocity_x") * time_index,
                         scene.Param("start_y") + scene.Param("velocity_y") * time_index,
                         scene.Param("box_depth") + 0.5 * size + scene.Param("velocity_z") * time_index);
}

Candidate Intersect(const SceneDescription& scene, const Ray& ray, int time_index) {
  Candidate best;
  switch (scene.kind) {
    case SceneKind::kCheckerPlane:
      Consider(best, HitPlaneZ(ray, scene.Param("depth")), kLabelBackground);
      break;
    case SceneKind::kTwoPlanes: {
      Consider(best, HitPlaneZ(ray, scene.Param("far_depth")), kLabelBackground);
      const double s = HitPlaneZ(ray, scene.Param("near_depth"));
      if (std::isfinite(s)) {
        const double x = ray.origin.x() + s * ray.direction.x();
        if (std::abs(x - scene.Param("near_center_x")) <= scene.Param("near_half_width")) {
          Consider(best, s, kLabelNearPlane);
        }
      }
      break;
    }
    case SceneKind::kTexturedSphere: {
      const double bg = scene.Param("background_depth");
      if (bg > 0.0) Consider(best, HitPlaneZ(ray, bg), kLabelBackground);
      Consider(best, HitSphere(ray, Eigen::Vector3d(0.0, 0.0, scene.Param("center_depth")), scene.Param("radius")),
               kLabelSphere);
      break;
    }
    case SceneKind::kMovingBox: {
      Consider(best, HitPlaneZ(ray, scene.Param("background_depth")), kLabelBackground);
      const Eigen::Vector3d c = BoxCenter(scene, time_index);
      const Eigen::Vector3d half = Eigen::Vector3d::Constant(0.5 * scene.Param("box_size"));
      Consider(best, HitBox(ray, c - half, c + half), kLabelBox);
      break;
    }
  }
  return best;
}

Rgb8 Shade(const SceneDescription& scene, const Eigen::Vector3d& p, int label, int time_index) {
  const double period = scene.Param("period");
  switch (label) {
    case kLabelSphere: {
      const Eigen::Vector3d d = p - Eigen::Vector3d(0.0, 0.0, scene.Param("center_depth"));
      const double r = scene.Param("radius");
      // Texture on (longitude, latitude) arc lengths.
      const double lon = std::atan2(d.x(), -d.z()) * r;
      const double lat = std::asin(std::clamp(d.y() / r, -1.0, 1.0)) * r;
      return Texture(lon, lat, period, label);
    }
    case kLabelBox: {
      const Eigen::Vector3d local = p - BoxCenter(scene, time_index);
      return Texture(local.x() + local.z(), local.y() + local.z(), period * 0.5, label);
    }
    default:
      return Texture(p.x(), p.y(), period, label);
  }
}

void CheckParams(const SceneDescription& d) {
  auto positive = [&](const std::string& key) {
    if (!(d.Param(key) > 0.0)) throw InvalidArgument("scene parameter '" + key + "' must be > 0");
  };
  positive("period");
  switch (d.kind) {
    case SceneKind::kCheckerPlane: positive("depth"); break;
    case SceneKind::kTwoPlanes:
      positive("near_depth");
      positive("far_depth");
      positive("near_half_width");
      if (!(d.Param("near_depth") < d.Param("far_depth"))) {
        throw InvalidArgument("scene parameter 'near_depth' must be smaller than 'far_depth'");
      }
      break;
    case SceneKind::kTexturedSphere:
      positive("radius");
      positive("center_depth");
      if (d.Param("background_depth") < 0.0) throw InvalidArgument("scene parameter 'background_depth' must be >= 0");
      break;
    case SceneKind::kMovingBox:
      positive("background_depth");
      positive("box_depth");
      positive("box_size");
      if (!(d.Param("box_depth") + d.Param("box_size") < d.Param("background_depth"))) {
        throw InvalidArgument("scene parameter 'box_depth' + 'box_size' must be in front of 'background_depth'");
      }
      break;
  }
}

}  // namespace

SceneKind ParseSceneKind(const std::string& name) {
  if (name == "checker_plane") return SceneKind::kCheckerPlane;
  if (name == "two_planes") return SceneKind::kTwoPlanes;
  if (name == "textured_sphere") return SceneKind::kTexturedSphere;
  if (name == "moving_box") return SceneKind::kMovingBox;
  throw InvalidArgument("unknown scene kind '" + name +
                        "' (expected checker_plane, two_planes, textured_sphere, moving_box)");
}

std::string ToString(SceneKind kind) {
  switch (kind) {
    case SceneKind::kCheckerPlane: return "checker_plane";
    case SceneKind::kTwoPlanes: return "two_planes";
    case SceneKind::kTexturedSphere: return "textured_sphere";
    case SceneKind::kMovingBox: return "moving_box";
  }
  return "unknown";
}

SceneDescription SceneDescription::Make(SceneKind kind, const SceneParams& overrides) {
  SceneDescription d{kind, Defaults(kind)};
  for (const auto& [key, value] : overrides) {
    auto it = d.params.find(key);
    if (it == d.params.end()) {
      throw InvalidArgument("scene '" + ToString(kind) + "' has no parameter '" + key + "'");
    }
    if (!std::isfinite(value)) throw InvalidArgument("scene parameter '" + key + "' must be finite");
    it->second = value;
  }
  CheckParams(d);
  return d;
}

double SceneDescription::Param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw InvalidArgument("scene parameter '" + key + "' missing");
  return it->second;
}

Intrinsics DefaultIntrinsics() { return Intrinsics{110.0, 110.0, 64.0, 48.0, 128, 96}; }

RayHit CastRay(const SceneDescription& scene, const Pose& pose, const Intrinsics& K, double u, double v,
               int time_index) {
  const Ray ray = MakeRay(pose, K, u, v);
  const Candidate hit = Intersect(scene, ray, time_index);
  return RayHit{hit.s, hit.label, ray.origin + hit.s * ray.direction};
}

RenderOutput RenderScene(const SceneDescription& scene, const Pose& pose, const Intrinsics& K, int time_index) {
  K.Validate();
  RenderOutput out{Frame(K.width, K.height, Rgb8{0, 0, 0}),
                   DepthMap{Grid<double>(K.width, K.height, 0.0), Mask(K.width, K.height, 0)},
                   Grid<int>(K.width, K.height, kLabelNone)};
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const RayHit hit = CastRay(scene, pose, K, x, y, time_index);
      if (hit.label == kLabelNone) continue;
      out.depth.values(x, y) = hit.depth;
      out.depth.valid(x, y) = 1;
      out.labels(x, y) = hit.label;
      out.frame(x, y) = Shade(scene, hit.world_point, hit.label, time_index);
    }
  }
  return out;
}

SyntheticScene MakeScene(SceneKind kind, const SceneParams& params, int frame_count, const CameraTrajectory& camera) {
  if (frame_count < 1) throw InvalidArgument("MakeScene: frame count must be >= 1");
  if (camera.poses.size() != 1 && camera.poses.size() != static_cast<std::size_t>(frame_count)) {
    throw InvalidArgument("MakeScene: camera must hold 1 or " + std::to_string(frame_count) + " poses");
  }
  camera.intrinsics.Validate();
  SyntheticScene scene;
  scene.description = SceneDescription::Make(kind, params);
  scene.trajectory.intrinsics = camera.intrinsics;
  for (int t = 0; t < frame_count; ++t) {
    const Pose& pose = camera.poses.size() == 1 ? camera.poses.front() : camera.poses[static_cast<std::size_t>(t)];
    RenderOutput r = RenderScene(scene.description, pose, camera.intrinsics, t);
    DynamicMask dyn{Mask(camera.intrinsics.width, camera.intrinsics.height, 0)};
    for (std::size_t i = 0; i < dyn.mask.size(); ++i) dyn.mask[i] = r.labels[i] == kLabelBox;
    scene.trajectory.poses.push_back(pose);
    scene.frames.push_back(std::move(r.frame));
    scene.depths.push_back(std::move(r.depth));
    scene.dynamic_masks.push_back(std::move(dyn));
  }
  return scene;
}

Mask AnalyticDisocclusion(const SceneDescription& scene, const Pose& source, const Pose& target, const Intrinsics& K,
                          int time_index) {
  Mask out(K.width, K.height, 0);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const RayHit hit = CastRay(scene, target, K, x, y, time_index);
      if (hit.label == kLabelNone) {
        out(x, y) = 1;
        continue;
      }
      const auto proj = Project(source.Apply(hit.world_point), K);
      if (!proj || !(proj->pixel.x() >= -0.5 && proj->pixel.x() < K.width - 0.5 && proj->pixel.y() >= -0.5 &&
                     proj->pixel.y() < K.height - 0.5)) {
        out(x, y) = 1;
        continue;
      }
      const RayHit back = CastRay(scene, source, K, proj->pixel.x(), proj->pixel.y(), time_index);
      const bool visible = back.label == hit.label && std::abs(back.depth - proj->depth) <= 1e-9 * proj->depth;
      out(x, y) = visible ? 0 : 1;
    }
  }
  return out;
}

FlowField AnalyticPlaneFlow(double plane_depth, const Pose& source, const Pose& target, const Intrinsics& K) {
  if (!(plane_depth > 0.0)) {
    throw InvalidArgument("AnalyticPlaneFlow: plane depth must be > 0, got " + std::to_string(plane_depth));
  }
  const RelativeTransform rel = RelativePose(source, target);
  const Eigen::Matrix3d Kmat = K.Matrix();
  const Eigen::Matrix3d Kinv = Kmat.inverse();
  // Points on n^T X = d satisfy X = (n^T X / d) X, so R X + t = (R + t n^T / d) X.
  const Eigen::Matrix3d A =
      rel.pose.rotation() + rel.pose.translation() * Eigen::RowVector3d(0.0, 0.0, 1.0) / plane_depth;
  const Eigen::Matrix3d H = Kmat * A * Kinv;
  const Eigen::Vector3d depth_row = plane_depth * (A * Kinv).row(2).transpose();

  FlowField flow(K.width, K.height);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const Eigen::Vector3d p(x, y, 1.0);
      const double z = depth_row.dot(p);
      if (!(z > kMinProjectDepth)) continue;
      const Eigen::Vector3d h = H * p;
      flow.vectors(x, y) = Eigen::Vector2d(h.x() / h.z() - x, h.y() / h.z() - y);
      flow.target_depth(x, y) = z;
      flow.valid(x, y) = 1;
    }
  }
  return flow;
}

}  // namespace trajwarp
