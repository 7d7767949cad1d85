#pragma once

// Residual motion of q1 once q2 and q3 sit on their maintenance references:
//   q1ddot = -beta sin(q1),  beta = m3 g q3 / (I3 + m3 (q3^2 + a1 q3)).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "casting/dynamics.hpp"
#include "casting/error.hpp"

namespace casting::control {

inline double zero_dynamics_beta(const RobotParams& p, double q3bar) {
  return p.m3 * p.g * q3bar / (p.I3 + p.m3 * (q3bar * q3bar + p.a1 * q3bar));
}

inline double zero_dynamics_beta(const RobotParams& p) {
  return zero_dynamics_beta(p, p.q3_nominal);
}

/// State derivative of (q1, q1dot).
inline Eigen::Vector2d zero_dynamics_field(double beta, const Eigen::Vector2d& x) {
  return {x[1], -beta * std::sin(x[0])};
}

/// Lyapunov candidate beta (1 - cos q1) + q1dot^2 (no 1/2 on the kinetic term).
inline double lyapunov_candidate(double beta, double q1, double q1dot) {
  return beta * (1.0 - std::cos(q1)) + q1dot * q1dot;
}

/// Closed-form rate of the candidate along the zero dynamics, -beta q1dot sin q1.
inline double lyapunov_rate(double beta, double q1, double q1dot) {
  return -beta * q1dot * std::sin(q1);
}

/// Conserved mechanical energy of the zero dynamics (per unit inertia).
inline double zero_dynamics_energy(double beta, double q1, double q1dot) {
  return beta * (1.0 - std::cos(q1)) + 0.5 * q1dot * q1dot;
}

struct ZeroDynamicsSample {
  double t = 0.0;
  double q1 = 0.0;
  double q1dot = 0.0;
};

struct ZeroDynamicsReport {
  double beta = 0.0;
  std::vector<double> V;
  std::vector<double> Vdot;          ///< closed-form rate at each sample
  double max_Vdot = 0.0;
  double max_V_increase = 0.0;       ///< largest V[k+1] - V[k]
  bool V_monotone = true;            ///< every step increase within tolerance
  /// Largest gap between the closed-form rate and the finite-difference rate
  /// of V along the samples.
  double max_rate_discrepancy = 0.0;
};

inline ZeroDynamicsReport zero_dynamics_check(const RobotParams& p,
                                              std::span<const ZeroDynamicsSample> traj,
                                              double step_tolerance = 1e-8) {
  ZeroDynamicsReport r;
  r.beta = zero_dynamics_beta(p);
  r.V.reserve(traj.size());
  r.Vdot.reserve(traj.size());
  r.max_Vdot = traj.empty() ? 0.0 : -INFINITY;
  for (const auto& s : traj) {
    if (!(s.q1 > -std::numbers::pi && s.q1 < std::numbers::pi))
      throw ValidationError("zero-dynamics samples must lie in (-pi, pi)");
    r.V.push_back(lyapunov_candidate(r.beta, s.q1, s.q1dot));
    r.Vdot.push_back(lyapunov_rate(r.beta, s.q1, s.q1dot));
    r.max_Vdot = std::max(r.max_Vdot, r.Vdot.back());
  }
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const double inc = r.V[k] - r.V[k - 1];
    r.max_V_increase = std::max(r.max_V_increase, inc);
    if (inc > step_tolerance) r.V_monotone = false;
    const double dt = traj[k].t - traj[k - 1].t;
    if (dt > 0.0) {
      const double fd = inc / dt;
      const double mid = 0.5 * (r.Vdot[k] + r.Vdot[k - 1]);
      r.max_rate_discrepancy = std::max(r.max_rate_discrepancy, std::abs(fd - mid));
    }
  }
  return r;
}

}  // namespace casting::control
