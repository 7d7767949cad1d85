#pragma once

// Point-mass models of the end-effector after release: the planar flight
// pulled by one tether, the three-cable spatial caster and the one-cable
// prototype on a line.

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "casting/error.hpp"

namespace casting {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::Vector4d;

inline constexpr double kCoincidenceTol = 1e-12;

struct PlanarFlightState {
  Vector2d pos = Vector2d::Zero();
  Vector2d vel = Vector2d::Zero();
  Vector2d anchor = Vector2d::Zero();  ///< tether departure point

  /// (x, y, xdot, ydot) packed for integration.
  Vector4d packed() const { return {pos.x(), pos.y(), vel.x(), vel.y()}; }
  static PlanarFlightState unpack(const Vector4d& x, const Vector2d& anchor) {
    return {x.head<2>(), x.tail<2>(), anchor};
  }
};

/// Gravity plus a pull of magnitude u toward the anchor.
inline Vector2d flight_accel_planar(const PlanarFlightState& fs, double m, double g, double u) {
  if (u < 0.0) throw UnilateralInputError("tether force must be >= 0");
  Vector2d acc{0.0, -g};
  if (u == 0.0) return acc;
  const Vector2d to_anchor = fs.anchor - fs.pos;
  const double dist = to_anchor.norm();
  if (dist < kCoincidenceTol) throw DegenerateGeometryError("end-effector at tether anchor");
  return acc + (u / m / dist) * to_anchor;
}

/// State derivative of the planar flight with a constant tether force.
inline Vector4d planar_flight_field(const Vector4d& x, const Vector2d& anchor, double m, double g,
                                    double u) {
  const Vector2d a = flight_accel_planar({x.head<2>(), x.tail<2>(), anchor}, m, g, u);
  return {x[2], x[3], a.x(), a.y()};
}

struct Flight3DState {
  Vector3d p = Vector3d::Zero();
  Vector3d v = Vector3d::Zero();
};

struct Caster3DGeometry {
  double b = 0.3;           ///< platform arm length [m]
  double r = 0.3;           ///< throw radius [m]
  double m = 1.0;           ///< end-effector mass [kg]
  double I_platform = 0.05; ///< recorded; the platform is frozen after release
  double g = 9.81;
  double u_max = 10.0;      ///< per-cable force bound [N]

  void validate() const {
    if (!(b > 0 && r > 0 && m > 0)) throw ValidationError("b, r and m must be positive");
    if (!(u_max > 0)) throw ValidationError("u_max must be positive");
    if (!(g >= 0)) throw ValidationError("gravity must be non-negative");
  }
};

/// Cable attachment points on the platform frozen at angle alpha (z up):
/// two arm tips at horizontal radius b and depth b*sqrt(3)/3, and the apex at
/// depth 2b*sqrt(3)/3 on the rotation axis.
inline std::array<Vector3d, 3> cable_anchors(const Caster3DGeometry& geom, double alpha) {
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  const double h = geom.b * std::sqrt(3.0) / 3.0;
  return {Vector3d{-geom.b * c, -geom.b * s, -h}, Vector3d{geom.b * c, geom.b * s, -h},
          Vector3d{0.0, 0.0, -2.0 * h}};
}

/// Column i is the unit vector from anchor i to the end-effector.
inline Matrix3d cable_matrix_3d(const Caster3DGeometry& geom, const Vector3d& p, double alpha) {
  const auto anchors = cable_anchors(geom, alpha);
  Matrix3d gamma;
  for (int i = 0; i < 3; ++i) {
    const Vector3d d = p - anchors[static_cast<std::size_t>(i)];
    const double n = d.norm();
    if (n < kCoincidenceTol) throw DegenerateGeometryError("end-effector at cable anchor");
    gamma.col(i) = d / n;
  }
  return gamma;
}

/// m * accel = -m g z - Gamma u.
inline Vector3d flight_accel_3d(const Caster3DGeometry& geom, const Flight3DState& fs, double alpha,
                                const Vector3d& u) {
  if ((u.array() < 0.0).any()) throw UnilateralInputError("cable forces must be >= 0");
  return -cable_matrix_3d(geom, fs.p, alpha) * u / geom.m - Vector3d{0.0, 0.0, geom.g};
}

/// m xddot = -sign(x) u, with sign(0) = 0.
inline double one_cable_accel(double m, double x, double u) {
  if (u < 0.0) throw UnilateralInputError("cable force must be >= 0");
  const double sgn = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  return -sgn * u / m;
}

/// Position and velocity at release for a platform spinning at omega0 and
/// released at angle alpha0.
inline Flight3DState throw_state_3d(const Caster3DGeometry& geom, double alpha0, double omega0) {
  const double c = std::cos(alpha0);
  const double s = std::sin(alpha0);
  return {Vector3d{-geom.r * s, geom.r * c, 0.0},
          Vector3d{geom.r * omega0 * c, geom.r * omega0 * s, 0.0}};
}

}  // namespace casting
