#include "trajwarp/pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <Eigen/Dense>

#include "trajwarp/errors.hpp"

namespace trajwarp {

namespace {

constexpr double kDegenerateCondition = 1e8;
constexpr int kMaxRefineIterations = 50;
constexpr double kRefineStepTolerance = 1e-10;
constexpr int kMaxStepHalvings = 40;

Eigen::Matrix3d Skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

double Cost(const Pose& pose, std::span<const Correspondence> corrs, const Intrinsics& K) {
  double cost = 0.0;
  for (const auto& c : corrs) {
    const auto proj = Project(pose.Apply(c.point3d), K);
    if (!proj) return std::numeric_limits<double>::infinity();
    cost += (proj->pixel - c.pixel).squaredNorm();
  }
  return cost;
}

std::vector<int> CollectInliers(const Pose& pose, std::span<const Correspondence> corrs, const Intrinsics& K,
                                double threshold) {
  std::vector<int> inliers;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (ReprojectionError(pose, corrs[i], K) < threshold) inliers.push_back(static_cast<int>(i));
  }
  return inliers;
}

std::vector<Correspondence> Subset(std::span<const Correspondence> corrs, const std::vector<int>& idx) {
  std::vector<Correspondence> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(corrs[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

void RansacConfig::Validate() const {
  if (!(inlier_threshold > 0.0)) throw InvalidArgument("RansacConfig.inlier_threshold must be > 0");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("RansacConfig.confidence must be in (0, 1)");
  if (max_iterations < 1) throw InvalidArgument("RansacConfig.max_iterations must be >= 1");
  if (min_sample < 6) throw InvalidArgument("RansacConfig.min_sample must be >= 6");
}

double ReprojectionError(const Pose& pose, const Correspondence& c, const Intrinsics& K) {
  const auto proj = Project(pose.Apply(c.point3d), K);
  if (!proj) return std::numeric_limits<double>::infinity();
  return (proj->pixel - c.pixel).norm();
}

Pose SolvePnpDlt(std::span<const Correspondence> corrs, const Intrinsics& K) {
  const std::size_t n = corrs.size();
  if (n < 6) throw InvalidArgument("SolvePnpDlt: need >= 6 correspondences, got " + std::to_string(n));

  // Work in normalized image coordinates so the solution is [R | t] up to scale.
  std::vector<Eigen::Vector2d> img(n);
  for (std::size_t i = 0; i < n; ++i) {
    img[i] = {(corrs[i].pixel.x() - K.cx) / K.fx, (corrs[i].pixel.y() - K.cy) / K.fy};
  }

  // Hartley conditioning of both point sets.
  Eigen::Vector3d c3 = Eigen::Vector3d::Zero();
  Eigen::Vector2d c2 = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    c3 += corrs[i].point3d;
    c2 += img[i];
  }
  c3 /= static_cast<double>(n);
  c2 /= static_cast<double>(n);
  double d3 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d3 += (corrs[i].point3d - c3).norm();
    d2 += (img[i] - c2).norm();
  }
  d3 /= static_cast<double>(n);
  d2 /= static_cast<double>(n);
  if (!(d3 > 0.0) || !(d2 > 0.0)) throw EstimationFailure("SolvePnpDlt: coincident points");
  const double s3 = std::sqrt(3.0) / d3;
  const double s2 = std::sqrt(2.0) / d2;

  Eigen::MatrixXd A(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector4d X;
    X << s3 * (corrs[i].point3d - c3), 1.0;
    const Eigen::Vector2d m = s2 * (img[i] - c2);
    A.row(2 * i) << X.transpose(), Eigen::RowVector4d::Zero(), -m.x() * X.transpose();
    A.row(2 * i + 1) << Eigen::RowVector4d::Zero(), X.transpose(), -m.y() * X.transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(10) * kDegenerateCondition > sv(0))) {
    throw EstimationFailure("SolvePnpDlt: degenerate configuration (condition number above 1e8)");
  }
  const Eigen::Matrix<double, 12, 1> h = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> Pn;
  Pn.row(0) = h.segment<4>(0).transpose();
  Pn.row(1) = h.segment<4>(4).transpose();
  Pn.row(2) = h.segment<4>(8).transpose();

  Eigen::Matrix3d T2inv = Eigen::Matrix3d::Identity();
  T2inv(0, 0) = T2inv(1, 1) = 1.0 / s2;
  T2inv.block<2, 1>(0, 2) = c2;
  Eigen::Matrix4d T3 = Eigen::Matrix4d::Identity();
  T3.block<3, 3>(0, 0) *= s3;
  T3.block<3, 1>(0, 3) = -s3 * c3;
  Eigen::Matrix<double, 3, 4> P = T2inv * Pn * T3;

  Eigen::Matrix3d M = P.leftCols<3>();
  if (M.determinant() < 0.0) {
    P = -P;
    M = -M;
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> polar(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d R = polar.matrixU() * polar.matrixV().transpose();
  const double scale = polar.singularValues().mean();
  if (!(scale > 0.0) || !std::isfinite(scale) || R.determinant() < 0.0) {
    throw EstimationFailure("SolvePnpDlt: could not extract a rotation");
  }
  return Pose(R, P.col(3) / scale);
}

RefineReport RefinePoseWithReport(const Pose& initial, std::span<const Correspondence> corrs, const Intrinsics& K) {
  if (corrs.size() < 3) {
    throw InvalidArgument("RefinePose: need >= 3 correspondences, got " + std::to_string(corrs.size()));
  }
  RefineReport report{initial, {}, 0};
  double cost = Cost(initial, corrs, K);
  if (!std::isfinite(cost)) throw EstimationFailure("RefinePose: initial pose puts points behind the camera");
  report.cost_history.push_back(cost);

  Pose pose = initial;
  for (int iter = 0; iter < kMaxRefineIterations; ++iter) {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (const auto& c : corrs) {
      const Eigen::Vector3d x = pose.Apply(c.point3d);
      const double iz = 1.0 / x.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << K.fx * iz, 0.0, -K.fx * x.x() * iz * iz, 0.0, K.fy * iz, -K.fy * x.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dx;
      dx << -Skew(x), Eigen::Matrix3d::Identity();
      const Eigen::Matrix<double, 2, 6> J = dproj * dx;
      const Eigen::Vector2d r(K.fx * x.x() * iz + K.cx - c.pixel.x(), K.fy * x.y() * iz + K.cy - c.pixel.y());
      H.noalias() += J.transpose() * J;
      g.noalias() += J.transpose() * r;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(H);
    const auto& ev = eig.eigenvalues();
    if (!(ev(0) > 1e-12 * ev(5)) || !(ev(5) > 0.0)) {
      throw EstimationFailure("RefinePose: rank-deficient normal equations");
    }
    Eigen::Matrix<double, 6, 1> step = -H.ldlt().solve(g);
    if (!step.allFinite()) throw EstimationFailure("RefinePose: non-finite update");
    report.iterations = iter + 1;
    if (step.norm() < kRefineStepTolerance) break;

    bool accepted = false;
    for (int halving = 0; halving <= kMaxStepHalvings; ++halving) {
      const Eigen::Matrix3d dR = ExpSO3(step.head<3>());
      Eigen::Matrix3d R = dR * pose.rotation();
      // Re-project onto SO(3) so round-off never accumulates past the pose invariant.
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
      R = svd.matrixU() * svd.matrixV().transpose();
      const Pose trial(R, dR * pose.translation() + step.tail<3>());
      const double trial_cost = Cost(trial, corrs, K);
      if (trial_cost <= cost) {
        pose = trial;
        cost = trial_cost;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    report.cost_history.push_back(cost);
    if (step.norm() < kRefineStepTolerance) break;
  }
  report.pose = pose;
  return report;
}

Pose RefinePose(const Pose& initial, std::span<const Correspondence> corrs, const Intrinsics& K) {
  return RefinePoseWithReport(initial, corrs, K).pose;
}

PnpResult PnpRansac(std::span<const Correspondence> corrs, const Intrinsics& K, const RansacConfig& config) {
  config.Validate();
  const int n = static_cast<int>(corrs.size());
  const int m = config.min_sample;
  if (n < m) {
    throw InvalidArgument("PnpRansac: need at least " + std::to_string(m) + " correspondences, got " +
                          std::to_string(n));
  }

  std::mt19937_64 rng(config.seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::vector<Correspondence> sample(static_cast<std::size_t>(m));

  std::optional<Pose> best_pose;
  std::size_t best_count = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  long long bound = config.max_iterations;
  int iterations = 0;

  for (long long it = 0; it < bound; ++it) {
    ++iterations;
    // Partial Fisher-Yates draw of m distinct indices.
    std::iota(order.begin(), order.end(), 0);
    for (int k = 0; k < m; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(pick(rng))]);
      sample[static_cast<std::size_t>(k)] = corrs[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    }

    Pose hypothesis;
    try {
      hypothesis = SolvePnpDlt(sample, K);
    } catch (const EstimationFailure&) {
      continue;  // degenerate draw, resample
    }

    std::size_t count = 0;
    double residual = 0.0;
    for (const auto& c : corrs) {
      const double e = ReprojectionError(hypothesis, c, K);
      if (e < config.inlier_threshold) {
        ++count;
        residual += e;
      }
    }
    if (count > best_count || (count == best_count && count > 0 && residual < best_residual)) {
      best_pose = hypothesis;
      best_count = count;
      best_residual = residual;
      const double w = static_cast<double>(count) / n;
      const double miss = 1.0 - std::pow(w, m);
      if (miss <= 0.0) {
        bound = std::min<long long>(bound, it + 1);
      } else {
        const double needed = std::ceil(std::log(1.0 - config.confidence) / std::log(miss));
        if (std::isfinite(needed)) bound = std::min<long long>(config.max_iterations, static_cast<long long>(needed));
      }
    }
  }

  if (!best_pose || best_count < static_cast<std::size_t>(m)) {
    throw EstimationFailure("PnpRansac: no model reached " + std::to_string(m) + " inliers after " +
                            std::to_string(iterations) + " iterations");
  }

  Pose pose = *best_pose;
  std::vector<int> inliers = CollectInliers(pose, corrs, K, config.inlier_threshold);
  for (int round = 0; round < 5; ++round) {
    Pose refined;
    try {
      refined = RefinePose(pose, Subset(corrs, inliers), K);
    } catch (const EstimationFailure&) {
      break;
    }
    std::vector<int> refined_inliers = CollectInliers(refined, corrs, K, config.inlier_threshold);
    if (refined_inliers.size() < inliers.size()) break;
    const bool stable = refined_inliers == inliers;
    pose = refined;
    inliers = std::move(refined_inliers);
    if (stable) break;
  }
  return PnpResult{pose, std::move(inliers), iterations};
}

PnpResult PoseFromDepthMatches(const DepthMap& depth_src, std::span<const PixelMatch> matches, const Intrinsics& K,
                               const RansacConfig& config) {
  std::vector<Correspondence> corrs;
  corrs.reserve(matches.size());
  for (const auto& match : matches) {
    const double rx = std::floor(match.source.x() + 0.5);
    const double ry = std::floor(match.source.y() + 0.5);
    if (!(rx >= 0.0 && ry >= 0.0 && rx < depth_src.width() && ry < depth_src.height())) continue;
    const int x = static_cast<int>(rx), y = static_cast<int>(ry);
    if (!depth_src.valid(x, y)) continue;
    corrs.push_back({Unproject(match.source, depth_src.values(x, y), K), match.target});
  }
  if (corrs.empty()) throw InvalidArgument("PoseFromDepthMatches: no match has a valid source depth");
  return PnpRansac(corrs, K, config);
}

}  // namespace trajwarp
