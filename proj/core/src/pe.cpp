#include "trajwarp/pe.hpp"

#include <cmath>

#include "trajwarp/errors.hpp"

namespace trajwarp {

PEMap SinusoidalPe(int height, int width, int channels, double base) {
  if (height <= 0 || width <= 0) throw InvalidArgument("SinusoidalPe: height and width must be positive");
  if (channels <= 0 || channels % 4 != 0) {
    throw InvalidArgument("SinusoidalPe: channel count must be a positive multiple of 4, got " +
                          std::to_string(channels));
  }
  if (!(base > 0.0)) throw InvalidArgument("SinusoidalPe: base must be positive");

  const int half = channels / 2;
  std::vector<double> inv_freq(static_cast<std::size_t>(half / 2));
  for (int i = 0; i < half / 2; ++i) {
    inv_freq[static_cast<std::size_t>(i)] = 1.0 / std::pow(base, (2.0 * i) / half);
  }

  PEMap pe{ChannelGrid(width, height, channels), base, Mask(width, height, 1)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int i = 0; i < half / 2; ++i) {
        const double au = x * inv_freq[static_cast<std::size_t>(i)];
        const double av = y * inv_freq[static_cast<std::size_t>(i)];
        pe.values(x, y, 2 * i) = std::sin(au);
        pe.values(x, y, 2 * i + 1) = std::cos(au);
        pe.values(x, y, half + 2 * i) = std::sin(av);
        pe.values(x, y, half + 2 * i + 1) = std::cos(av);
      }
    }
  }
  return pe;
}

PEMap RealignPe(const PEMap& pe, const FlowField& flow) {
  SampleResult sampled = BackwardSample(pe.values, flow);
  return PEMap{std::move(sampled.values), pe.base, std::move(sampled.valid)};
}

CoordinateMaps MakeCoordinateMaps(int height, int width, const FlowField& flow) {
  if (flow.width() != width || flow.height() != height) {
    throw InvalidArgument("MakeCoordinateMaps: flow is " + std::to_string(flow.width()) + "x" +
                          std::to_string(flow.height()) + ", expected " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  ChannelGrid identity(width, height, 2);
  const double sx = width > 1 ? 1.0 / (width - 1) : 0.0;
  const double sy = height > 1 ? 1.0 / (height - 1) : 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      identity(x, y, 0) = x * sx;
      identity(x, y, 1) = y * sy;
    }
  }
  SampleResult warped = BackwardSample(identity, flow);
  return CoordinateMaps{CoordinateMap{std::move(identity), Mask(width, height, 1)},
                        CoordinateMap{std::move(warped.values), std::move(warped.valid)}};
}

}  // namespace trajwarp
