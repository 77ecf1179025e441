#include "trajwarp/geometry.hpp"

#include <cmath>

#include "trajwarp/errors.hpp"

namespace trajwarp {

DepthMap DepthMap::FromValues(Grid<double> values) {
  Mask valid(values.width(), values.height(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    valid[i] = std::isfinite(values[i]) && values[i] > 0.0;
  }
  return DepthMap{std::move(values), std::move(valid)};
}

FlowField::FlowField(int width, int height)
    : vectors(width, height, Eigen::Vector2d::Zero()),
      valid(width, height, 0),
      target_depth(width, height, 0.0) {}

FlowField FlowField::Uniform(int width, int height, const Eigen::Vector2d& v) {
  FlowField flow(width, height);
  for (std::size_t i = 0; i < flow.vectors.size(); ++i) {
    flow.vectors[i] = v;
    flow.valid[i] = 1;
    flow.target_depth[i] = 1.0;
  }
  return flow;
}

Pointmap LiftDepth(const DepthMap& depth, const Intrinsics& K, const std::optional<Pose>& pose) {
  RequireSameShape(depth.values, depth.valid, "LiftDepth(depth.values, depth.valid)");
  if (depth.width() != K.width || depth.height() != K.height) {
    throw InvalidArgument("LiftDepth: depth is " + std::to_string(depth.width()) + "x" +
                          std::to_string(depth.height()) + " but intrinsics are " + std::to_string(K.width) +
                          "x" + std::to_string(K.height));
  }
  Pointmap out{Grid<Eigen::Vector3d>(depth.width(), depth.height(), Eigen::Vector3d::Zero()),
               Mask(depth.width(), depth.height(), 0),
               pose ? PointFrame::kWorld : PointFrame::kSourceCamera};
  const std::optional<Pose> cam_to_world = pose ? std::optional<Pose>(pose->Inverse()) : std::nullopt;

  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!depth.valid(x, y)) continue;
      const double d = depth.values(x, y);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      Eigen::Vector3d p = Unproject(Eigen::Vector2d(x, y), d, K);
      if (cam_to_world) p = cam_to_world->Apply(p);
      out.points(x, y) = p;
      out.valid(x, y) = 1;
    }
  }
  return out;
}

FlowField ProjectPointmap(const Pointmap& pointmap, const Pose& to_target_camera, const Intrinsics& K) {
  RequireSameShape(pointmap.points, pointmap.valid, "ProjectPointmap(points, valid)");
  FlowField flow(pointmap.width(), pointmap.height());
  for (int y = 0; y < pointmap.height(); ++y) {
    for (int x = 0; x < pointmap.width(); ++x) {
      if (!pointmap.valid(x, y)) continue;
      const auto proj = Project(to_target_camera.Apply(pointmap.points(x, y)), K);
      if (!proj) continue;
      const Eigen::Vector2d f = proj->pixel - Eigen::Vector2d(x, y);
      if (!f.allFinite()) continue;
      flow.vectors(x, y) = f;
      flow.target_depth(x, y) = proj->depth;
      flow.valid(x, y) = 1;
    }
  }
  return flow;
}

namespace {

bool IsExactIdentity(const Pose& pose) {
  return pose.rotation() == Eigen::Matrix3d::Identity() && pose.translation() == Eigen::Vector3d::Zero();
}

// Identity motion: every point maps onto its own pixel. Taking this path keeps
// the flow exactly zero instead of the round-off of project(unproject(p)).
FlowField ZeroMotionFlow(const Pointmap& pointmap, const Pose& to_source_camera) {
  FlowField flow(pointmap.width(), pointmap.height());
  for (std::size_t i = 0; i < flow.vectors.size(); ++i) {
    if (!pointmap.valid[i]) continue;
    const double z = to_source_camera.Apply(pointmap.points[i]).z();
    if (!(z > kMinProjectDepth)) continue;
    flow.target_depth[i] = z;
    flow.valid[i] = 1;
  }
  return flow;
}

}  // namespace

FlowField ComputeFlow(const Pointmap& pointmap, const RelativeTransform& rel, const Intrinsics& K,
                      const std::optional<Pose>& source_extrinsic) {
  RequireSameShape(pointmap.points, pointmap.valid, "ComputeFlow(points, valid)");
  if (pointmap.width() != K.width || pointmap.height() != K.height) {
    throw InvalidArgument("ComputeFlow: pointmap size does not match intrinsics");
  }
  Pose to_source = Pose::Identity();
  if (pointmap.frame == PointFrame::kWorld) {
    if (!source_extrinsic) {
      throw InvalidArgument("ComputeFlow: world-frame pointmap requires the source extrinsic");
    }
    to_source = *source_extrinsic;
  }
  if (IsExactIdentity(rel.pose)) return ZeroMotionFlow(pointmap, to_source);
  if (pointmap.frame == PointFrame::kWorld) return ProjectPointmap(pointmap, rel.pose * to_source, K);
  return ProjectPointmap(pointmap, rel.pose, K);
}

DynamicMask EstimateDynamicMask(const FlowField& optical_flow, const FlowField& induced_flow, double threshold) {
  RequireSameShape(optical_flow.vectors, induced_flow.vectors, "EstimateDynamicMask");
  if (!(threshold >= 0.0)) throw InvalidArgument("EstimateDynamicMask: threshold must be >= 0");
  DynamicMask out{Mask(optical_flow.width(), optical_flow.height(), 0)};
  for (std::size_t i = 0; i < out.mask.size(); ++i) {
    if (!optical_flow.valid[i] || !induced_flow.valid[i]) continue;
    out.mask[i] = (optical_flow.vectors[i] - induced_flow.vectors[i]).norm() > threshold;
  }
  return out;
}

}  // namespace trajwarp
