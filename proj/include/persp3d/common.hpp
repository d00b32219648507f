#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace persp3d {

template <typename S> using Vec2 = Eigen::Matrix<S, 2, 1>;
template <typename S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S> using Mat3 = Eigen::Matrix<S, 3, 3>;
template <typename S> using Points29 = Eigen::Matrix<S, 2, 9>;   // [center, a..h] as columns
template <typename S> using Corners38 = Eigen::Matrix<S, 3, 8>;  // a..h as columns

// Depth below which a point counts as behind the camera (meters).
inline constexpr double kDepthEps = 1e-6;
// Endpoints closer than this define no line (normalized units or pixels alike).
inline constexpr double kCoincidentEps = 1e-12;
// Loss value substituted when a line pair is degenerate.
inline constexpr double kDegeneratePenalty = 10.0;
// |w| / |(x,y)| of a homogeneous intersection below this is treated as a
// vanishing point at infinity and scored by direction angles. Euclidean
// distance between dehomogenized points loses all precision well before
// this ratio reaches zero.
inline constexpr double kParallelKappa = 3e-3;
// Huber transition for the vanishing-point distance (normalized units).
inline constexpr double kHuberDelta = 1.0;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BehindCamera : Error { using Error::Error; };
struct DegenerateLine : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };
struct NoGroundTruth : Error { using Error::Error; };
struct RejectionOverflow : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };

/// Wrap an angle to [-pi, pi).
template <typename S> inline S wrap_angle(S a) {
  const S pi = std::numbers::pi_v<S>;
  return a - S(2) * pi * std::floor((a + pi) / (S(2) * pi));
}

/// Fold an angle of an undirected line to [-pi/2, pi/2).
template <typename S> inline S fold_half_pi(S a) {
  const S pi = std::numbers::pi_v<S>;
  return a - pi * std::floor(a / pi + S(0.5));
}

template <typename S> inline S clamp01(S v) {
  return v < S(0) ? S(0) : (v > S(1) ? S(1) : v);
}

}  // namespace persp3d
