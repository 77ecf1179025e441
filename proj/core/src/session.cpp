#include "trajwarp/session.hpp"

#include <charconv>
#include <cstdio>

#include "trajwarp/errors.hpp"
#include "trajwarp/io.hpp"

namespace trajwarp {

namespace fs = std::filesystem;

namespace {

fs::path Numbered(const fs::path& dir, const char* sub, const char* stem, int t, const char* ext) {
  char name[64];
  std::snprintf(name, sizeof(name), "%s_%04d%s", stem, t, ext);
  return dir / sub / name;
}

// FNV-1a over every file the session is built from.
struct Fnv1a {
  std::uint64_t h = 1469598103934665603ull;
  void Add(std::span<const std::uint8_t> bytes) {
    for (auto b : bytes) h = (h ^ b) * 1099511628211ull;
  }
};

}  // namespace

fs::path FramePath(const fs::path& dir, int t) { return Numbered(dir, "frames", "frame", t, ".png"); }
fs::path DepthPath(const fs::path& dir, int t) { return Numbered(dir, "depth", "depth", t, ".pfm"); }
fs::path DynamicMaskPath(const fs::path& dir, int t) { return Numbered(dir, "dynamic", "mask", t, ".png"); }
fs::path CameraPath(const fs::path& dir) { return dir / "camera.json"; }

void WriteSceneDirectory(const fs::path& dir, const SyntheticScene& scene) {
  io::WriteCamera(CameraPath(dir), scene.trajectory);
  for (std::size_t t = 0; t < scene.frames.size(); ++t) {
    const int i = static_cast<int>(t);
    io::WritePngRgb(FramePath(dir, i), scene.frames[t]);
    io::WritePfm(DepthPath(dir, i), scene.depths[t]);
    if (!scene.dynamic_masks.empty()) io::WriteMaskPng(DynamicMaskPath(dir, i), scene.dynamic_masks[t].mask);
  }
}

SceneSession LoadSceneSession(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("scene directory '" + dir.string() + "' does not exist");
  Fnv1a hash;
  SceneSession s;
  const io::Bytes camera = io::ReadFile(CameraPath(dir));
  hash.Add(camera);
  s.trajectory = io::ParseCameraJson(std::string(camera.begin(), camera.end()));
  const Intrinsics& K = s.trajectory.intrinsics;
  const int T = static_cast<int>(s.trajectory.poses.size());

  const bool has_dynamic = fs::exists(DynamicMaskPath(dir, 0));
  for (int t = 0; t < T; ++t) {
    const io::Bytes png = io::ReadFile(FramePath(dir, t));
    hash.Add(png);
    Frame frame = io::DecodePngRgb(png);
    fs::path depth_path = DepthPath(dir, t);
    if (!fs::exists(depth_path)) depth_path.replace_extension(".png");
    hash.Add(io::ReadFile(depth_path));
    DepthMap depth = io::ReadDepth(depth_path);
    if (frame.width() != K.width || frame.height() != K.height || depth.width() != K.width ||
        depth.height() != K.height) {
      throw InvalidArgument("frame " + std::to_string(t) + ": image or depth size differs from camera.json intrinsics");
    }
    DynamicMask dyn{Mask(K.width, K.height, 0)};
    if (has_dynamic) {
      const io::Bytes mask = io::ReadFile(DynamicMaskPath(dir, t));
      hash.Add(mask);
      dyn.mask = io::DecodeMaskPng(mask);
      RequireSameShape(dyn.mask, frame, "dynamic mask " + std::to_string(t));
    }
    s.world_pointmaps.push_back(LiftDepth(depth, K, s.trajectory.poses[static_cast<std::size_t>(t)]));
    s.frames.push_back(std::move(frame));
    s.depths.push_back(std::move(depth));
    s.dynamic_masks.push_back(std::move(dyn));
  }
  char id[17];
  std::snprintf(id, sizeof(id), "%016llx", static_cast<unsigned long long>(hash.h));
  s.id = id;
  return s;
}

WarpMode ParseWarpMode(const std::string& name) {
  if (name == "per-frame") return WarpMode::kPerFrame;
  if (name == "all-frame") return WarpMode::kAllFrame;
  throw InvalidArgument("unknown warp mode '" + name + "' (expected per-frame or all-frame)");
}

std::string ToString(WarpMode mode) { return mode == WarpMode::kPerFrame ? "per-frame" : "all-frame"; }

SplatMode ParseSplatMode(const std::string& name) {
  if (name == "nearest") return SplatMode::kNearest;
  if (name == "bilinear") return SplatMode::kBilinear;
  throw InvalidArgument("unknown splat mode '" + name + "' (expected nearest or bilinear)");
}

std::string ToString(SplatMode mode) { return mode == SplatMode::kNearest ? "nearest" : "bilinear"; }

FlowField PreviewFlow(const SceneSession& session, int frame, const RelativeTransform& rel) {
  if (frame < 0 || frame >= session.frame_count()) {
    throw InvalidArgument("frame " + std::to_string(frame) + " out of range");
  }
  const auto t = static_cast<std::size_t>(frame);
  return ComputeFlow(session.world_pointmaps[t], rel, session.intrinsics(), session.trajectory.poses[t]);
}

WarpResult RenderPreview(const SceneSession& session, int frame, const RelativeTransform& rel, WarpMode mode,
                         SplatMode splat) {
  if (mode == WarpMode::kPerFrame) {
    FlowField flow = PreviewFlow(session, frame, rel);
    return ForwardWarp(session.frames[static_cast<std::size_t>(frame)], flow, splat);
  }
  if (frame < 0 || frame >= session.frame_count()) {
    throw InvalidArgument("frame " + std::to_string(frame) + " out of range");
  }
  const Pose target = ApplyRelative(session.trajectory.poses[static_cast<std::size_t>(frame)], rel);
  return AggregateAllFrames(session.frames, session.world_pointmaps, session.dynamic_masks, frame, target,
                            session.intrinsics(), splat);
}

std::string FormatDouble(double value) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, r.ptr);
}

}  // namespace trajwarp
