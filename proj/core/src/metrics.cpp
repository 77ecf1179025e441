#include "trajwarp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "trajwarp/errors.hpp"

namespace trajwarp {

namespace {

class NeumaierSum {
 public:
  void Add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double Value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

std::vector<double> Gaussian1D() {
  const int r = kSsimWindow / 2;
  std::vector<double> g(kSsimWindow);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    g[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * kSsimSigma * kSsimSigma));
    total += g[static_cast<std::size_t>(i + r)];
  }
  for (double& v : g) v /= total;
  return g;
}

}  // namespace

double CompensatedMean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  NeumaierSum s;
  for (double v : values) s.Add(v);
  return s.Value() / static_cast<double>(values.size());
}

double Psnr(const Frame& a, const Frame& b, const Mask* mask) {
  RequireSameShape(a, b, "Psnr");
  if (mask) RequireSameShape(a, *mask, "Psnr(mask)");
  NeumaierSum sq;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = static_cast<double>(a[i][c]) - static_cast<double>(b[i][c]);
      sq.Add(d * d);
    }
    n += 3;
  }
  if (n == 0) throw InvalidArgument("Psnr: mask selects no pixels");
  const double mse = sq.Value() / static_cast<double>(n);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 20.0 * std::log10(255.0 / std::sqrt(mse)));
}

std::vector<double> SsimWindow() {
  const std::vector<double> g1 = Gaussian1D();
  std::vector<double> w(kSsimWindow * kSsimWindow);
  for (int y = 0; y < kSsimWindow; ++y) {
    for (int x = 0; x < kSsimWindow; ++x) {
      w[static_cast<std::size_t>(y * kSsimWindow + x)] = g1[static_cast<std::size_t>(y)] * g1[static_cast<std::size_t>(x)];
    }
  }
  return w;
}

Grid<double> Luma(const Frame& frame) {
  Grid<double> y(frame.width(), frame.height(), 0.0);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    y[i] = 0.299 * frame[i][0] + 0.587 * frame[i][1] + 0.114 * frame[i][2];
  }
  return y;
}

double Ssim(const Frame& a, const Frame& b, const Mask* mask) {
  RequireSameShape(a, b, "Ssim");
  if (mask) RequireSameShape(a, *mask, "Ssim(mask)");
  const int w = a.width(), h = a.height();
  if (std::min(w, h) < kSsimWindow) {
    throw InvalidArgument("Ssim: image " + std::to_string(w) + "x" + std::to_string(h) +
                          " is smaller than the 11x11 window");
  }
  const Grid<double> x = Luma(a);
  const Grid<double> y = Luma(b);
  const int r = kSsimWindow / 2;

  // Separable Gaussian: horizontal pass over every row, vertical pass at the
  // valid centers.
  const std::vector<double> g1 = Gaussian1D();
  const int ow = w - 2 * r;
  constexpr int kStats = 5;
  std::vector<double> horiz(static_cast<std::size_t>(ow) * h * kStats, 0.0);
  for (int row = 0; row < h; ++row) {
    for (int cx = 0; cx < ow; ++cx) {
      double s[kStats] = {0, 0, 0, 0, 0};
      for (int k = 0; k < kSsimWindow; ++k) {
        const double wk = g1[static_cast<std::size_t>(k)];
        const double xv = x(cx + k, row), yv = y(cx + k, row);
        s[0] += wk * xv;
        s[1] += wk * yv;
        s[2] += wk * xv * xv;
        s[3] += wk * yv * yv;
        s[4] += wk * xv * yv;
      }
      for (int q = 0; q < kStats; ++q) horiz[(static_cast<std::size_t>(row) * ow + cx) * kStats + q] = s[q];
    }
  }

  NeumaierSum total;
  std::size_t count = 0;
  for (int cy = r; cy < h - r; ++cy) {
    for (int cx = r; cx < w - r; ++cx) {
      if (mask && !(*mask)(cx, cy)) continue;
      double s[kStats] = {0, 0, 0, 0, 0};
      for (int k = 0; k < kSsimWindow; ++k) {
        const double wk = g1[static_cast<std::size_t>(k)];
        const double* hv = &horiz[(static_cast<std::size_t>(cy - r + k) * ow + (cx - r)) * kStats];
        for (int q = 0; q < kStats; ++q) s[q] += wk * hv[q];
      }
      const double mx = s[0], my = s[1];
      const double vx = s[2] - mx * mx;
      const double vy = s[3] - my * my;
      const double cxy = s[4] - mx * my;
      const double num = (2.0 * mx * my + kC1) * (2.0 * cxy + kC2);
      const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
      total.Add(num / den);
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("Ssim: mask selects no complete window");
  return total.Value() / static_cast<double>(count);
}

OcclusionMasks ComputeOcclusionMasks(const FlowField& flow_src_to_tgt, const WarpResult& warp) {
  RequireSameShape(flow_src_to_tgt.vectors, warp.hole_mask, "ComputeOcclusionMasks");
  OcclusionMasks out{Mask(warp.hole_mask.width(), warp.hole_mask.height(), 0), warp.hole_mask};
  for (std::size_t i = 0; i < out.covisible.size(); ++i) out.covisible[i] = warp.hole_mask[i] ? 0 : 1;
  return out;
}

DistanceKind ParseDistanceKind(const std::string& name) {
  if (name == "1-ssim" || name == "one_minus_ssim") return DistanceKind::kOneMinusSsim;
  if (name == "mae") return DistanceKind::kMeanAbsolute;
  if (name == "rmse") return DistanceKind::kRmse;
  throw InvalidArgument("unknown distance '" + name + "' (expected 1-ssim, mae, rmse)");
}

FrameDistance MakeDistance(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::kOneMinusSsim:
      return [](const Frame& a, const Frame& b) { return 1.0 - Ssim(a, b); };
    case DistanceKind::kMeanAbsolute:
      return [](const Frame& a, const Frame& b) {
        RequireSameShape(a, b, "mae");
        NeumaierSum s;
        for (std::size_t i = 0; i < a.size(); ++i) {
          for (std::size_t c = 0; c < 3; ++c) s.Add(std::abs(double(a[i][c]) - double(b[i][c])));
        }
        return s.Value() / (3.0 * static_cast<double>(a.size()));
      };
    case DistanceKind::kRmse:
      return [](const Frame& a, const Frame& b) {
        RequireSameShape(a, b, "rmse");
        NeumaierSum s;
        for (std::size_t i = 0; i < a.size(); ++i) {
          for (std::size_t c = 0; c < 3; ++c) {
            const double d = double(a[i][c]) - double(b[i][c]);
            s.Add(d * d);
          }
        }
        return std::sqrt(s.Value() / (3.0 * static_cast<double>(a.size())));
      };
  }
  throw InvalidArgument("unknown distance kind");
}

std::vector<CurvePoint> BinCurve(std::span<const double> difficulty, std::span<const double> distortion, int bins) {
  if (difficulty.empty()) throw InvalidArgument("difficulty/distortion: no samples");
  if (difficulty.size() != distortion.size()) throw InvalidArgument("difficulty/distortion: length mismatch");
  if (bins < 1) throw InvalidArgument("difficulty/distortion: bins must be >= 1");

  const auto [lo_it, hi_it] = std::minmax_element(difficulty.begin(), difficulty.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = (hi - lo) / bins;

  std::vector<NeumaierSum> dist_sum(static_cast<std::size_t>(bins)), diff_sum(static_cast<std::size_t>(bins));
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < difficulty.size(); ++i) {
    int b = 0;
    if (width > 0.0) b = std::clamp(static_cast<int>(std::floor((difficulty[i] - lo) / width)), 0, bins - 1);
    dist_sum[static_cast<std::size_t>(b)].Add(distortion[i]);
    diff_sum[static_cast<std::size_t>(b)].Add(difficulty[i]);
    ++counts[static_cast<std::size_t>(b)];
  }

  std::vector<CurvePoint> curve;
  for (int b = 0; b < bins; ++b) {
    const int n = counts[static_cast<std::size_t>(b)];
    if (n == 0) continue;
    const double center = width > 0.0 ? lo + (b + 0.5) * width : lo;
    curve.push_back({center, dist_sum[static_cast<std::size_t>(b)].Value() / n,
                     diff_sum[static_cast<std::size_t>(b)].Value() / n, n});
  }
  return curve;
}

std::vector<CurvePoint> DifficultyDistortion(std::span<const FrameTriple> triples, const FrameDistance& distance,
                                             int bins) {
  if (triples.empty()) throw InvalidArgument("DifficultyDistortion: empty input");
  std::vector<double> difficulty, distortion;
  difficulty.reserve(triples.size());
  distortion.reserve(triples.size());
  for (const auto& t : triples) {
    difficulty.push_back(distance(t.input, t.target));
    distortion.push_back(distance(t.generated, t.target));
  }
  return BinCurve(difficulty, distortion, bins);
}

double CurveSlope(std::span<const CurvePoint> curve) {
  if (curve.size() < 2) throw InvalidArgument("CurveSlope: need at least two curve points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : curve) {
    mx += p.bin_center;
    my += p.mean_distortion;
  }
  mx /= static_cast<double>(curve.size());
  my /= static_cast<double>(curve.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& p : curve) {
    sxy += (p.bin_center - mx) * (p.mean_distortion - my);
    sxx += (p.bin_center - mx) * (p.bin_center - mx);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("CurveSlope: bin centers are identical");
  return sxy / sxx;
}

std::string MetricReportToJson(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [name, series] : report.metrics) {
    j["metrics"][name] = {{"per_frame", series.per_frame}, {"mean", series.mean}};
  }
  j["mask"] = report.mask;
  j["curve"] = nlohmann::ordered_json::array();
  for (const auto& p : report.curve) {
    j["curve"].push_back({{"bin", p.bin_center},
                          {"mean", p.mean_distortion},
                          {"count", p.count},
                          {"mean_difficulty", p.mean_difficulty}});
  }
  return j.dump(2);
}

}  // namespace trajwarp
