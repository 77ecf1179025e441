#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajwarp/camera.hpp"
#include "trajwarp/geometry.hpp"
#include "trajwarp/pe.hpp"
#include "trajwarp/pose.hpp"
#include "trajwarp/warp.hpp"

namespace trajwarp::io {

using Bytes = std::vector<std::uint8_t>;

Bytes ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Depth: PFM ("Pf", single channel, bottom-to-top rows, negative scale means
// little-endian) or 16-bit grayscale PNG with a "<file>.scale" text sidecar
// holding the depth of one unit. Invalid pixels are stored as non-positive.

DepthMap DecodePfm(std::span<const std::uint8_t> bytes);
Bytes EncodePfm(const DepthMap& depth);
DepthMap ReadPfm(const std::filesystem::path& path);
void WritePfm(const std::filesystem::path& path, const DepthMap& depth);

DepthMap ReadDepthPng16(const std::filesystem::path& path);
void WriteDepthPng16(const std::filesystem::path& path, const DepthMap& depth, double scale);

/// Dispatch on extension (.pfm or .png).
DepthMap ReadDepth(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Middlebury .flo: float32 202021.25, int32 width, int32 height, then (u, v)
// float32 pairs row-major, little-endian. Components above 1e9 mark unknown.

inline constexpr float kFloMagic = 202021.25f;
inline constexpr float kFloUnknown = 1e10f;

FlowField DecodeFlo(std::span<const std::uint8_t> bytes);
Bytes EncodeFlo(const FlowField& flow);
FlowField ReadFlo(const std::filesystem::path& path);
void WriteFlo(const std::filesystem::path& path, const FlowField& flow);

// ---------------------------------------------------------------------------
// CAMT tensors: "CAMT", u32 ndim, u32 dims[ndim], float32 data row-major,
// all little-endian.

struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  std::size_t Elements() const;
};

Tensor DecodeTensor(std::span<const std::uint8_t> bytes);
Bytes EncodeTensor(const Tensor& tensor);
Tensor ReadTensor(const std::filesystem::path& path);
void WriteTensor(const std::filesystem::path& path, const Tensor& tensor);

/// (H, W, C); invalid pixels (valid == 0) are written as NaN when a mask is given.
Tensor ToTensor(const ChannelGrid& grid, const Mask* valid = nullptr);
ChannelGrid ChannelGridFromTensor(const Tensor& tensor);
/// (H, W); +inf entries survive as +inf.
Tensor ToTensor(const Grid<double>& grid);
/// (H, W, 3) with NaN at invalid points.
Tensor ToTensor(const Pointmap& pointmap);
Pointmap PointmapFromTensor(const Tensor& tensor, PointFrame frame);

// ---------------------------------------------------------------------------
// Camera / trajectory JSON:
// {"intrinsics":{"fx","fy","cx","cy","width","height"},
//  "frames":[{"index":int,"R":[[3x3 row-major]],"t":[3]}]}
// Frames must list indices 0..T-1 (any order in the file).

CameraTrajectory ParseCameraJson(const std::string& text);
std::string CameraJson(const CameraTrajectory& trajectory);
CameraTrajectory ReadCamera(const std::filesystem::path& path);
void WriteCamera(const std::filesystem::path& path, const CameraTrajectory& trajectory);

/// Bare intrinsics object {"fx","fy","cx","cy","width","height"}.
Intrinsics ParseIntrinsicsJson(const std::string& text);

/// Single pose {"R":[[...]],"t":[...]}; `field` prefixes error messages.
Pose ParsePoseJson(const std::string& text, const std::string& field = "pose");
std::string PoseJson(const Pose& pose);

/// Same schema with arbitrary (sorted, unique) frame indices.
std::string TrajectoryJson(const Intrinsics& intrinsics, std::span<const Keyframe> frames);

/// Keyframe list {"frames":[{"index","R","t"}...]} (intrinsics optional).
std::vector<Keyframe> ParseKeyframesJson(const std::string& text);

// ---------------------------------------------------------------------------
// Matches: [{"src":[u,v],"tgt":[u,v]}, ...]

std::vector<PixelMatch> ParseMatchesJson(const std::string& text);
std::string MatchesJson(std::span<const PixelMatch> matches);

// ---------------------------------------------------------------------------
// PNG

Bytes EncodePngRgb(const Frame& frame);
Frame DecodePngRgb(std::span<const std::uint8_t> bytes);
Frame ReadPngRgb(const std::filesystem::path& path);
void WritePngRgb(const std::filesystem::path& path, const Frame& frame);

/// 1-bit grayscale; set pixels are white.
Bytes EncodeMaskPng(const Mask& mask);
Mask DecodeMaskPng(std::span<const std::uint8_t> bytes);
Mask ReadMaskPng(const std::filesystem::path& path);
void WriteMaskPng(const std::filesystem::path& path, const Mask& mask);

/// Middlebury color-wheel visualization. `max_magnitude` <= 0 normalizes by
/// the largest valid vector. Invalid pixels are black.
Frame FlowToColor(const FlowField& flow, double max_magnitude = 0.0);

}  // namespace trajwarp::io
