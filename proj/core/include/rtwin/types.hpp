#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <numbers>

namespace rtwin {

// Longitudinal body state, ordered [xdot, zdot, thetadot, x, z, theta].
using State = Eigen::Matrix<double, 6, 1>;
// Control action [A_phi, beta, A_off] in radians.
using Action = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

namespace idx {
inline constexpr int kXdot = 0;
inline constexpr int kZdot = 1;
inline constexpr int kThetadot = 2;
inline constexpr int kX = 3;
inline constexpr int kZ = 4;
inline constexpr int kTheta = 5;

inline constexpr int kAmplitude = 0;
inline constexpr int kStrokePlane = 1;
inline constexpr int kOffset = 2;
}  // namespace idx

inline constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Any state component above this magnitude (SI units) aborts an episode.
inline constexpr double kDefaultBlowUpBound = 1.0e3;

}  // namespace rtwin
