#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajwarp/geometry.hpp"
#include "trajwarp/grid.hpp"
#include "trajwarp/warp.hpp"

namespace trajwarp {

inline constexpr double kPsnrCap = 99.0;

/// 20 log10(255 / sqrt(MSE)) over the masked pixels (all three channels),
/// capped at kPsnrCap. Throws InvalidArgument on a mask with no set pixel.
double Psnr(const Frame& a, const Frame& b, const Mask* mask = nullptr);

/// Mean local SSIM on BT.601 luma with an 11x11 Gaussian window (sigma 1.5),
/// C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2, over windows fully inside the
/// image. With a mask, only window centers inside the mask are averaged.
double Ssim(const Frame& a, const Frame& b, const Mask* mask = nullptr);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Normalized 11x11 Gaussian weights, row-major.
std::vector<double> SsimWindow();

/// Luma plane used by Ssim.
Grid<double> Luma(const Frame& frame);

struct OcclusionMasks {
  Mask covisible;
  Mask occluded;
};

/// occluded = warp.hole_mask, covisible = its complement.
OcclusionMasks ComputeOcclusionMasks(const FlowField& flow_src_to_tgt, const WarpResult& warp);

/// Frame distance used by the difficulty/distortion protocol.
using FrameDistance = std::function<double(const Frame&, const Frame&)>;

enum class DistanceKind { kOneMinusSsim, kMeanAbsolute, kRmse };
DistanceKind ParseDistanceKind(const std::string& name);
FrameDistance MakeDistance(DistanceKind kind);

struct FrameTriple {
  Frame input;
  Frame generated;
  Frame target;
};

struct CurvePoint {
  double bin_center;
  double mean_distortion;
  double mean_difficulty;
  int count;
};

/// Bin (difficulty, distortion) pairs into `bins` equal-width difficulty bins
/// over the observed range; one point per non-empty bin.
std::vector<CurvePoint> BinCurve(std::span<const double> difficulty, std::span<const double> distortion, int bins);

/// difficulty = d(input, target), distortion = d(generated, target).
std::vector<CurvePoint> DifficultyDistortion(std::span<const FrameTriple> triples, const FrameDistance& distance,
                                             int bins);

/// Least-squares slope of mean distortion against bin center.
double CurveSlope(std::span<const CurvePoint> curve);

struct MetricSeries {
  std::vector<double> per_frame;
  double mean = 0.0;
};

struct MetricReport {
  std::map<std::string, MetricSeries> metrics;
  std::string mask = "full";
  std::vector<CurvePoint> curve;
};

/// Mean with Neumaier compensated summation.
double CompensatedMean(std::span<const double> values);

/// {"metrics":{name:{"per_frame":[...],"mean":x}},"mask":"...","curve":[{bin,mean,count}]}
std::string MetricReportToJson(const MetricReport& report);

}  // namespace trajwarp
