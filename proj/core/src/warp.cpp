#include "trajwarp/warp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "trajwarp/errors.hpp"

namespace trajwarp {

double WarpResult::HoleFraction() const {
  if (hole_mask.empty()) return 0.0;
  return static_cast<double>(CountSet(hole_mask)) / static_cast<double>(hole_mask.size());
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// A source sample headed for continuous target position (x, y). Splats are
// consumed in priority order; on equal depth the earlier splat wins.
struct Splat {
  double x;
  double y;
  double depth;
  Rgb8 color;
};

void AppendSplats(const Frame& frame, const FlowField& flow, const Mask* keep, std::vector<Splat>& out) {
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      if (!flow.valid(x, y)) continue;
      if (keep != nullptr && !(*keep)(x, y)) continue;
      const Eigen::Vector2d& f = flow.vectors(x, y);
      out.push_back(Splat{x + f.x(), y + f.y(), flow.target_depth(x, y), frame(x, y)});
    }
  }
}

WarpResult EmptyResult(int width, int height) {
  return WarpResult{Frame(width, height, Rgb8{0, 0, 0}), Grid<double>(width, height, kInf),
                    Mask(width, height, 1)};
}

WarpResult RasterizeNearest(int width, int height, const std::vector<Splat>& splats) {
  WarpResult out = EmptyResult(width, height);
  for (const Splat& s : splats) {
    const double rx = std::floor(s.x + 0.5);
    const double ry = std::floor(s.y + 0.5);
    if (!(rx >= 0.0 && ry >= 0.0 && rx < width && ry < height)) continue;
    const int tx = static_cast<int>(rx);
    const int ty = static_cast<int>(ry);
    if (!(s.depth < out.depth_buffer(tx, ty))) continue;
    out.depth_buffer(tx, ty) = s.depth;
    out.image(tx, ty) = s.color;
    out.hole_mask(tx, ty) = 0;
  }
  return out;
}

template <typename Fn>
void ForEachFootprint(const Splat& s, int width, int height, Fn&& fn) {
  const double fx = std::floor(s.x);
  const double fy = std::floor(s.y);
  const double ax = s.x - fx;
  const double ay = s.y - fy;
  const double wx[2] = {1.0 - ax, ax};
  const double wy[2] = {1.0 - ay, ay};
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const double w = wx[i] * wy[j];
      if (!(w > 0.0)) continue;
      const double px = fx + i;
      const double py = fy + j;
      if (!(px >= 0.0 && py >= 0.0 && px < width && py < height)) continue;
      fn(static_cast<int>(px), static_cast<int>(py), w);
    }
  }
}

// Weighted colors of the splats whose depth falls in [layer, layer * (1 + band)].
ChannelGrid AccumulateLayer(int width, int height, const std::vector<Splat>& splats, const Grid<double>& layer) {
  ChannelGrid accum(width, height, 4, 0.0);
  for (const Splat& s : splats) {
    ForEachFootprint(s, width, height, [&](int x, int y, double w) {
      const double d = layer(x, y);
      if (s.depth < d || s.depth > d * (1.0 + kBilinearDepthBand)) return;
      for (int c = 0; c < 3; ++c) accum(x, y, c) += w * s.color[static_cast<std::size_t>(c)];
      accum(x, y, 3) += w;
    });
  }
  return accum;
}

WarpResult RasterizeBilinear(int width, int height, const std::vector<Splat>& splats) {
  WarpResult out = EmptyResult(width, height);
  for (const Splat& s : splats) {
    ForEachFootprint(s, width, height, [&](int x, int y, double) {
      if (s.depth < out.depth_buffer(x, y)) out.depth_buffer(x, y) = s.depth;
    });
  }
  // The nearest surface behind the front layer, for silhouette pixels.
  Grid<double> back(width, height, kInf);
  for (const Splat& s : splats) {
    ForEachFootprint(s, width, height, [&](int x, int y, double) {
      if (s.depth > out.depth_buffer(x, y) * (1.0 + kBilinearDepthBand) && s.depth < back(x, y)) back(x, y) = s.depth;
    });
  }
  const ChannelGrid front_accum = AccumulateLayer(width, height, splats, out.depth_buffer);
  const ChannelGrid back_accum = AccumulateLayer(width, height, splats, back);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const bool covered = front_accum(x, y, 3) >= kBilinearCoverage;
      const bool use_back = !covered && back_accum(x, y, 3) > 0.0;
      if (!covered && !use_back) {
        out.depth_buffer(x, y) = kInf;
        continue;
      }
      const ChannelGrid& accum = use_back ? back_accum : front_accum;
      const double w = accum(x, y, 3);
      if (!(w > 0.0)) continue;
      Rgb8 color{};
      for (int c = 0; c < 3; ++c) {
        const double v = std::floor(accum(x, y, c) / w + 0.5);
        color[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
      if (use_back) out.depth_buffer(x, y) = back(x, y);
      out.image(x, y) = color;
      out.hole_mask(x, y) = 0;
    }
  }
  return out;
}

WarpResult Rasterize(int width, int height, const std::vector<Splat>& splats, SplatMode mode) {
  return mode == SplatMode::kNearest ? RasterizeNearest(width, height, splats)
                                     : RasterizeBilinear(width, height, splats);
}

}  // namespace

WarpResult ForwardWarp(const Frame& frame, const FlowField& flow, SplatMode mode) {
  RequireSameShape(frame, flow.vectors, "ForwardWarp(frame, flow)");
  RequireSameShape(flow.vectors, flow.valid, "ForwardWarp(flow.vectors, flow.valid)");
  RequireSameShape(flow.vectors, flow.target_depth, "ForwardWarp(flow.vectors, flow.target_depth)");
  std::vector<Splat> splats;
  splats.reserve(frame.size());
  AppendSplats(frame, flow, nullptr, splats);
  return Rasterize(frame.width(), frame.height(), splats, mode);
}

WarpResult AggregateAllFrames(std::span<const Frame> frames, std::span<const Pointmap> pointmaps,
                              std::span<const DynamicMask> dynamic_masks, int t, const Pose& target_pose,
                              const Intrinsics& K, SplatMode mode) {
  if (frames.empty()) throw InvalidArgument("AggregateAllFrames: empty sequence");
  if (pointmaps.size() != frames.size() || dynamic_masks.size() != frames.size()) {
    throw InvalidArgument("AggregateAllFrames: sequence lengths differ (frames " + std::to_string(frames.size()) +
                          ", pointmaps " + std::to_string(pointmaps.size()) + ", masks " +
                          std::to_string(dynamic_masks.size()) + ")");
  }
  if (t < 0 || static_cast<std::size_t>(t) >= frames.size()) {
    throw InvalidArgument("AggregateAllFrames: frame index " + std::to_string(t) + " out of range");
  }
  for (std::size_t s = 0; s < frames.size(); ++s) {
    if (pointmaps[s].frame != PointFrame::kWorld) {
      throw InvalidArgument("AggregateAllFrames: pointmap " + std::to_string(s) + " is not in the world frame");
    }
    RequireSameShape(frames[s], pointmaps[s].points, "AggregateAllFrames(frame, pointmap)");
    RequireSameShape(frames[s], dynamic_masks[s].mask, "AggregateAllFrames(frame, dynamic mask)");
    RequireSameShape(frames[s], frames[0], "AggregateAllFrames(frame sizes)");
  }

  std::vector<Splat> splats;
  splats.reserve(frames.size() * frames[0].size());
  const auto ut = static_cast<std::size_t>(t);
  AppendSplats(frames[ut], ProjectPointmap(pointmaps[ut], target_pose, K), nullptr, splats);
  for (std::size_t s = 0; s < frames.size(); ++s) {
    if (s == ut) continue;
    Mask is_static(frames[s].width(), frames[s].height(), 0);
    for (std::size_t i = 0; i < is_static.size(); ++i) is_static[i] = dynamic_masks[s].mask[i] == 0;
    AppendSplats(frames[s], ProjectPointmap(pointmaps[s], target_pose, K), &is_static, splats);
  }
  return Rasterize(K.width, K.height, splats, mode);
}

namespace {

struct AxisTap {
  int i0;
  int i1;
  double a;        // weight of i1
  bool clamped;    // coordinate sat on or beyond a border
};

AxisTap MakeTap(double coord, int size) {
  if (coord < 0.0) return {0, 0, 0.0, true};
  const double last = static_cast<double>(size - 1);
  if (coord >= last) return {size - 1, size - 1, 0.0, true};
  const double f = std::floor(coord);
  const int i0 = static_cast<int>(f);
  return {i0, i0 + 1, coord - f, false};
}

double Lerp2(const ChannelGrid& g, const AxisTap& tx, const AxisTap& ty, int c) {
  // Skip zero-weight taps so integer lookups return stored values bit-for-bit.
  auto row = [&](int y) {
    const double v0 = g(tx.i0, y, c);
    if (tx.a == 0.0) return v0;
    return (1.0 - tx.a) * v0 + tx.a * g(tx.i1, y, c);
  };
  const double r0 = row(ty.i0);
  if (ty.a == 0.0) return r0;
  return (1.0 - ty.a) * r0 + ty.a * row(ty.i1);
}

}  // namespace

BilinearSample SampleBilinear(const ChannelGrid& grid, double x, double y, int channel) {
  if (channel < 0 || channel >= grid.channels()) throw InvalidArgument("SampleBilinear: channel out of range");
  const AxisTap tx = MakeTap(x, grid.width());
  const AxisTap ty = MakeTap(y, grid.height());
  BilinearSample out{Lerp2(grid, tx, ty, channel), 0.0, 0.0};
  if (!tx.clamped && tx.i1 != tx.i0) {
    const double top = grid(tx.i1, ty.i0, channel) - grid(tx.i0, ty.i0, channel);
    const double bottom = grid(tx.i1, ty.i1, channel) - grid(tx.i0, ty.i1, channel);
    out.d_dx = (1.0 - ty.a) * top + ty.a * bottom;
  }
  if (!ty.clamped && ty.i1 != ty.i0) {
    const double left = grid(tx.i0, ty.i1, channel) - grid(tx.i0, ty.i0, channel);
    const double right = grid(tx.i1, ty.i1, channel) - grid(tx.i1, ty.i0, channel);
    out.d_dy = (1.0 - tx.a) * left + tx.a * right;
  }
  return out;
}

SampleResult BackwardSample(const ChannelGrid& grid, const FlowField& flow) {
  if (grid.width() != flow.width() || grid.height() != flow.height()) {
    throw InvalidArgument("BackwardSample: grid is " + std::to_string(grid.width()) + "x" +
                          std::to_string(grid.height()) + " but flow is " + std::to_string(flow.width()) + "x" +
                          std::to_string(flow.height()));
  }
  SampleResult out{ChannelGrid(grid.width(), grid.height(), grid.channels(), 0.0),
                   Mask(grid.width(), grid.height(), 0)};
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (!flow.valid(x, y)) continue;
      const Eigen::Vector2d& f = flow.vectors(x, y);
      if (!f.allFinite()) continue;
      const AxisTap tx = MakeTap(x + f.x(), grid.width());
      const AxisTap ty = MakeTap(y + f.y(), grid.height());
      for (int c = 0; c < grid.channels(); ++c) out.values(x, y, c) = Lerp2(grid, tx, ty, c);
      out.valid(x, y) = 1;
    }
  }
  return out;
}

ChannelGrid ToChannelGrid(const Frame& frame) {
  ChannelGrid g(frame.width(), frame.height(), 3);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      for (int c = 0; c < 3; ++c) g(x, y, c) = frame(x, y)[static_cast<std::size_t>(c)];
    }
  }
  return g;
}

}  // namespace trajwarp
