#pragma once

#include <cmath>

#include "casting/dynamics.hpp"
#include "casting/error.hpp"

namespace casting::control {

/// Torque and tether force that impose qddot2 = u2 and qddot3 = u3.
struct LinearizingCommand {
  double tau1 = 0.0;
  double f3 = 0.0;     ///< required tether force; negative when tautness is lost
  bool taut = true;    ///< f3 >= 0
  double q1ddot = 0.0; ///< resulting acceleration of the unactuated direction
};

inline constexpr double kDecouplingTol = 1e-9;

/// Exact input-output linearization with respect to (q2, q3).
///
/// The second row of B qddot = gamma + (tau1, 0, -f3) fixes qddot1 once
/// qddot2 and qddot3 are imposed; rows one and three then give tau1 and f3.
/// Here gamma = -C qdot - G.
inline LinearizingCommand linearizing_feedback(const RobotParams& p, const JointState& s, double u2,
                                               double u3) {
  const DynMatrices dm = eval_dynamics_matrices(p, s);
  const Matrix3d& B = dm.B;
  if (std::abs(B(1, 0)) < kDecouplingTol) throw SingularDecouplingError("b21 is zero");
  const Vector3d gamma = -dm.C * s.qdot - dm.G;

  LinearizingCommand cmd;
  cmd.q1ddot = (gamma[1] - B(1, 1) * u2 - B(1, 2) * u3) / B(1, 0);
  cmd.tau1 = B(0, 0) * cmd.q1ddot + B(0, 1) * u2 + B(0, 2) * u3 - gamma[0];
  cmd.f3 = gamma[2] - B(2, 0) * cmd.q1ddot - B(2, 1) * u2 - B(2, 2) * u3;
  cmd.taut = cmd.f3 >= 0.0;
  return cmd;
}

struct TrackingGains {
  double kp2 = 100.0;
  double kv2 = 20.0;
  double kp3 = 400.0;
  double kv3 = 40.0;

  void validate() const {
    if (!(kp2 > 0 && kv2 > 0 && kp3 > 0 && kv3 > 0))
      throw ValidationError("tracking gains must be strictly positive");
  }
};

/// Desired outputs and their first two derivatives at one instant.
struct ReferenceSample {
  double q2 = 0.0, q2dot = 0.0, q2ddot = 0.0;
  double q3 = 0.0, q3dot = 0.0, q3ddot = 0.0;
};

struct OutputCommand {
  double u2 = 0.0;
  double u3 = 0.0;
};

/// Feedforward plus PD on the tracking error e = reference - measured.
inline OutputCommand tracking_inputs(const ReferenceSample& ref, const JointState& s,
                                     const TrackingGains& k) {
  return {ref.q2ddot + k.kv2 * (ref.q2dot - s.qdot[1]) + k.kp2 * (ref.q2 - s.q[1]),
          ref.q3ddot + k.kv3 * (ref.q3dot - s.qdot[2]) + k.kp3 * (ref.q3 - s.q[2])};
}

}  // namespace casting::control
