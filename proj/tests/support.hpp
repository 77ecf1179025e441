#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "trajwarp/camera.hpp"

namespace trajwarp::test {

inline Intrinsics SmallIntrinsics() { return Intrinsics{100.0, 100.0, 64.0, 48.0, 128, 96}; }

inline Eigen::Vector3d RandomAxisAngle(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_angle);
  Eigen::Vector3d axis(n(rng), n(rng), n(rng));
  return axis.normalized() * u(rng);
}

inline Pose RandomPose(std::mt19937_64& rng, double max_angle = 3.0, double max_translation = 2.0) {
  std::uniform_real_distribution<double> u(-max_translation, max_translation);
  return Pose(ExpSO3(RandomAxisAngle(rng, max_angle)), Eigen::Vector3d(u(rng), u(rng), u(rng)));
}

inline double MaxAbs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace trajwarp::test
