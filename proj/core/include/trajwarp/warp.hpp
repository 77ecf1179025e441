#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "trajwarp/camera.hpp"
#include "trajwarp/geometry.hpp"
#include "trajwarp/grid.hpp"

namespace trajwarp {

using Rgb8 = std::array<std::uint8_t, 3>;

/// 8-bit sRGB image.
using Frame = Grid<Rgb8>;

struct WarpResult {
  Frame image;
  /// Target-camera depth; +inf where nothing landed.
  Grid<double> depth_buffer;
  /// 1 where no source pixel landed.
  Mask hole_mask;

  double HoleFraction() const;
};

enum class SplatMode {
  /// Each source pixel lands on the rounded target pixel. Exact z-buffer.
  kNearest,
  /// Each source pixel spreads over its 2x2 bilinear footprint; contributions
  /// within a small relative depth band of the nearest are blended by weight.
  /// A front surface covering less than kBilinearCoverage of a pixel yields
  /// it to the next surface behind, when one landed there.
  kBilinear,
};

/// Relative depth band used by kBilinear to decide which contributions share a
/// surface with the nearest one.
inline constexpr double kBilinearDepthBand = 0.01;
/// Accumulated weight at which the front surface owns a target pixel.
inline constexpr double kBilinearCoverage = 0.5;

/// Forward-splat `frame` through `flow`. Conflicts go to the smaller target
/// depth; equal depths to the smaller row-major source index.
WarpResult ForwardWarp(const Frame& frame, const FlowField& flow, SplatMode mode = SplatMode::kNearest);

/// All-frame reprojection for frame `t`: static points of every frame plus all
/// points of frame t, projected into `target_pose` with one shared z-buffer.
/// Equal depths prefer frame t, then the lower frame index, then the lower
/// row-major index.
WarpResult AggregateAllFrames(std::span<const Frame> frames, std::span<const Pointmap> pointmaps,
                              std::span<const DynamicMask> dynamic_masks, int t, const Pose& target_pose,
                              const Intrinsics& K, SplatMode mode = SplatMode::kNearest);

struct SampleResult {
  ChannelGrid values;
  Mask valid;
};

/// Gather `grid` at (u + f_x, v + f_y) with bilinear weights, clamping
/// coordinates to the border. Invalid flow gives zeros and valid = 0.
SampleResult BackwardSample(const ChannelGrid& grid, const FlowField& flow);

struct BilinearSample {
  double value;
  /// d value / d x and d value / d y at the sampling location.
  double d_dx;
  double d_dy;
};

/// Single bilinear lookup with its spatial derivative (the derivative with
/// respect to the flow components). Zero derivative along a clamped axis.
BilinearSample SampleBilinear(const ChannelGrid& grid, double x, double y, int channel);

/// Frame <-> grid helpers.
ChannelGrid ToChannelGrid(const Frame& frame);

}  // namespace trajwarp
