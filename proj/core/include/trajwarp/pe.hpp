#pragma once

#include "trajwarp/geometry.hpp"
#include "trajwarp/grid.hpp"
#include "trajwarp/warp.hpp"

namespace trajwarp {

inline constexpr double kDefaultPeBase = 10000.0;

/// Sinusoidal positional-encoding map. Channel layout (C divisible by 4):
///   [0, C/2)  encode the column u, [C/2, C) encode the row v;
///   within each half, channel 2i = sin(p / base^(2i / (C/2))), 2i+1 = cos(...).
struct PEMap {
  ChannelGrid values;
  double base = kDefaultPeBase;
  /// 1 where the value is defined (all ones for a freshly generated map).
  Mask valid;
};

PEMap SinusoidalPe(int height, int width, int channels, double base = kDefaultPeBase);

/// PE'(u, v) = PE(u + f_x(u, v), v + f_y(u, v)) by bilinear gather with
/// border clamping. Invalid flow pixels are zero with valid = 0.
PEMap RealignPe(const PEMap& pe, const FlowField& flow);

/// H x W x 2 normalized coordinates (u / (W-1), v / (H-1)).
struct CoordinateMap {
  ChannelGrid values;
  Mask valid;
};

struct CoordinateMaps {
  CoordinateMap identity;
  CoordinateMap warped;
};

/// The identity coordinate grid and the same grid gathered through `flow`.
CoordinateMaps MakeCoordinateMaps(int height, int width, const FlowField& flow);

}  // namespace trajwarp
