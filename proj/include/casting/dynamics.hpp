#pragma once

// Planar casting manipulator: one actuated revolute link (q1), an unactuated
// tether departure angle (q2) and a reeled tether treated as a prismatic
// joint (q3), valid while the tether stays taut.

#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "casting/error.hpp"

namespace casting {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

/// Geometric and inertial constants of the planar caster.
struct RobotParams {
  double x_base = 0.0;
  double y_base = 1.695;
  double a1 = 0.342;   ///< tether attachment distance along link 1 [m]
  double l1 = 0.171;   ///< link-1 centre-of-mass distance from the joint [m]
  double m1 = 1.1105;
  double I1 = 0.0216;
  double m3 = 0.084;
  double I3 = 1.344e-5;
  double g = 9.81;
  double q3_nominal = 0.495;  ///< nominal tether length during swing [m]

  /// Values of the laboratory prototype.
  static RobotParams prototype() { return {}; }

  void validate() const {
    if (!(a1 > 0 && l1 > 0 && m1 > 0 && I1 > 0 && m3 > 0 && I3 > 0 && q3_nominal > 0))
      throw ValidationError("robot masses, inertias and lengths must be strictly positive");
    if (!(g > 0)) throw ValidationError("gravity must be positive");
  }
};

struct JointState {
  Vector3d q = Vector3d::Zero();     ///< (q1 [rad], q2 [rad], q3 [m])
  Vector3d qdot = Vector3d::Zero();
};

struct DynMatrices {
  Matrix3d B;
  Matrix3d C;
  Vector3d G;
};

inline Matrix3d inertia_matrix(const RobotParams& p, const Vector3d& q) {
  const double c2 = std::cos(q[1]);
  const double s2 = std::sin(q[1]);
  const double q3 = q[2];
  Matrix3d B;
  B(0, 0) = p.I1 + p.I3 + p.m1 * p.l1 * p.l1 +
            p.m3 * (p.a1 * p.a1 + q3 * q3 + 2.0 * p.a1 * q3 * c2);
  B(0, 1) = p.I3 + p.m3 * (q3 * q3 + p.a1 * q3 * c2);
  B(0, 2) = p.m3 * p.a1 * s2;
  B(1, 1) = p.I3 + p.m3 * q3 * q3;
  B(1, 2) = 0.0;
  B(2, 2) = p.m3;
  B(1, 0) = B(0, 1);
  B(2, 0) = B(0, 2);
  B(2, 1) = B(1, 2);
  return B;
}

/// dB/dq_i for i = 0..2. B does not depend on q1.
inline std::array<Matrix3d, 3> inertia_partials(const RobotParams& p, const Vector3d& q) {
  const double c2 = std::cos(q[1]);
  const double s2 = std::sin(q[1]);
  const double q3 = q[2];
  std::array<Matrix3d, 3> d{Matrix3d::Zero(), Matrix3d::Zero(), Matrix3d::Zero()};

  d[1](0, 0) = -2.0 * p.m3 * p.a1 * q3 * s2;
  d[1](0, 1) = d[1](1, 0) = -p.m3 * p.a1 * q3 * s2;
  d[1](0, 2) = d[1](2, 0) = p.m3 * p.a1 * c2;

  d[2](0, 0) = p.m3 * (2.0 * q3 + 2.0 * p.a1 * c2);
  d[2](0, 1) = d[2](1, 0) = p.m3 * (2.0 * q3 + p.a1 * c2);
  d[2](1, 1) = 2.0 * p.m3 * q3;
  return d;
}

/// Coriolis/centrifugal matrix from the Christoffel symbols of B, so that
/// dB/dt - 2C is skew-symmetric.
inline Matrix3d coriolis_matrix(const RobotParams& p, const Vector3d& q, const Vector3d& qdot) {
  const auto dB = inertia_partials(p, q);
  Matrix3d C = Matrix3d::Zero();
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i)
        C(k, j) += 0.5 * (dB[i](k, j) + dB[j](k, i) - dB[k](i, j)) * qdot[i];
  return C;
}

/// Gradient of the potential energy. The tether-mass moment on joint 1 uses
/// the tether length q3 as its lever arm.
inline Vector3d gravity_vector(const RobotParams& p, const Vector3d& q) {
  const double s1 = std::sin(q[0]);
  const double s12 = std::sin(q[0] + q[1]);
  const double c12 = std::cos(q[0] + q[1]);
  return {p.m1 * p.g * p.l1 * s1 + p.m3 * p.g * (p.a1 * s1 + q[2] * s12),
          p.m3 * p.g * q[2] * s12,
          -p.m3 * p.g * c12};
}

inline DynMatrices eval_dynamics_matrices(const RobotParams& p, const JointState& s) {
  if (s.q[2] < 0.0) throw ValidationError("tether length q3 must be non-negative");
  return {inertia_matrix(p, s.q), coriolis_matrix(p, s.q, s.qdot), gravity_vector(p, s.q)};
}

/// The closed-form C and G entries exactly as tabulated in the original
/// derivation, including the entries that disagree with the Christoffel form.
/// Kept for cross-checking only.
inline DynMatrices tabulated_dynamics_matrices(const RobotParams& p, const JointState& s) {
  const Vector3d& q = s.q;
  const Vector3d& v = s.qdot;
  const double c2 = std::cos(q[1]);
  const double s2 = std::sin(q[1]);
  const double s1 = std::sin(q[0]);
  const double s12 = std::sin(q[0] + q[1]);
  const double c12 = std::cos(q[0] + q[1]);
  const double q3 = q[2];
  const double m3 = p.m3;
  const double a1 = p.a1;
  Matrix3d C;
  C(0, 0) = -m3 * a1 * q3 * s2 * v[1] + m3 * (a1 * c2 + q3) * v[2];
  C(0, 1) = -m3 * a1 * q3 * s2 * (v[0] + v[1]) + m3 * (a1 * c2 + q3) * v[2];
  C(0, 2) = m3 * (a1 * c2 + q3) * (v[0] + v[1]);
  C(1, 0) = m3 * a1 * q3 * s2 * v[0] + m3 * q3 * v[2];
  C(1, 1) = m3 * q3 * v[2];
  C(1, 2) = m3 * q3 * (v[0] + v[1]);
  C(2, 0) = -m3 * (a1 * c2 + q3) * v[0] - m3 * q3 * v[1];
  C(2, 1) = -m3 * q3 * (v[1] + v[2]);
  C(2, 2) = 0.0;
  Vector3d G{p.m1 * p.g * p.l1 * s1 + m3 * p.g * (a1 * s1 + q[1] * s12),
             m3 * p.g * q3 * s12,
             -m3 * p.g * c12};
  return {inertia_matrix(p, q), C, G};
}

struct EndEffectorPose {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
};

inline EndEffectorPose forward_kinematics(const RobotParams& p, const JointState& s) {
  const double q1 = s.q[0];
  const double q12 = s.q[0] + s.q[1];
  return {p.x_base + p.a1 * std::sin(q1) + s.q[2] * std::sin(q12),
          p.y_base - p.a1 * std::cos(q1) - s.q[2] * std::cos(q12),
          q12 + std::numbers::pi / 2.0};
}

/// Point where the tether leaves link 1.
inline Vector2d tether_anchor(const RobotParams& p, double q1) {
  return {p.x_base + p.a1 * std::sin(q1), p.y_base - p.a1 * std::cos(q1)};
}

/// Analytic Jacobian of forward_kinematics: t_e = J(q) qdot.
inline Matrix3d jacobian(const RobotParams& p, const JointState& s) {
  const double c1 = std::cos(s.q[0]);
  const double s1 = std::sin(s.q[0]);
  const double c12 = std::cos(s.q[0] + s.q[1]);
  const double s12 = std::sin(s.q[0] + s.q[1]);
  const double q3 = s.q[2];
  Matrix3d J;
  J << p.a1 * c1 + q3 * c12, q3 * c12, s12,
       p.a1 * s1 + q3 * s12, q3 * s12, -c12,
       1.0, 1.0, 0.0;
  return J;
}

/// qddot = B^-1 (tau - C qdot - G) with tau = (tau1, 0, -f3).
inline Vector3d planar_joint_accel(const RobotParams& p, const JointState& s, double tau1,
                                   double f3) {
  if (f3 < 0.0) throw UnilateralInputError("tether force f3 must be >= 0");
  const DynMatrices dm = eval_dynamics_matrices(p, s);
  const Vector3d tau{tau1, 0.0, -f3};
  return dm.B.ldlt().solve(tau - dm.C * s.qdot - dm.G);
}

}  // namespace casting
