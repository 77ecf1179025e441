#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trajwarp/camera.hpp"
#include "trajwarp/geometry.hpp"
#include "trajwarp/synth.hpp"
#include "trajwarp/warp.hpp"

namespace trajwarp {

/// Scene directory layout:
///   camera.json               intrinsics + per-frame extrinsics
///   frames/frame_0000.png     RGB frames
///   depth/depth_0000.pfm      z-depth (or depth_0000.png + .scale sidecar)
///   dynamic/mask_0000.png     optional 1-bit dynamic masks
std::filesystem::path FramePath(const std::filesystem::path& dir, int t);
std::filesystem::path DepthPath(const std::filesystem::path& dir, int t);
std::filesystem::path DynamicMaskPath(const std::filesystem::path& dir, int t);
std::filesystem::path CameraPath(const std::filesystem::path& dir);

/// Write a synthetic scene in the layout above.
void WriteSceneDirectory(const std::filesystem::path& dir, const SyntheticScene& scene);

/// Immutable loaded scene. World pointmaps are lifted once at load.
struct SceneSession {
  std::string id;
  CameraTrajectory trajectory;
  std::vector<Frame> frames;
  std::vector<DepthMap> depths;
  std::vector<Pointmap> world_pointmaps;
  std::vector<DynamicMask> dynamic_masks;

  int frame_count() const { return static_cast<int>(frames.size()); }
  const Intrinsics& intrinsics() const { return trajectory.intrinsics; }
};

/// Throws FormatError / InvalidArgument on a missing or inconsistent scene.
/// The id is a content hash, so reloading the same files gives the same id.
SceneSession LoadSceneSession(const std::filesystem::path& dir);

enum class WarpMode { kPerFrame, kAllFrame };

WarpMode ParseWarpMode(const std::string& name);
std::string ToString(WarpMode mode);
SplatMode ParseSplatMode(const std::string& name);
std::string ToString(SplatMode mode);

/// The single warp path behind both the CLI and the preview service.
/// Per-frame: forward warp of frame t by the flow its pointmap induces under
/// `rel`. All-frame: aggregation of every frame into the target pose rel * E_t.
WarpResult RenderPreview(const SceneSession& session, int frame, const RelativeTransform& rel, WarpMode mode,
                         SplatMode splat = SplatMode::kNearest);

/// Flow of frame t under `rel`.
FlowField PreviewFlow(const SceneSession& session, int frame, const RelativeTransform& rel);

/// Shortest round-trip decimal text for a double, as used in reports and
/// the X-Hole-Fraction header.
std::string FormatDouble(double value);

}  // namespace trajwarp
