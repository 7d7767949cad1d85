#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>

#include <Eigen/Core>

#include "casting/error.hpp"

namespace casting {

namespace detail {

template <class State>
bool all_finite(const State& x) {
  if constexpr (std::is_arithmetic_v<State>) {
    return std::isfinite(x);
  } else {
    return x.allFinite();
  }
}

}  // namespace detail

/// One classical fourth-order Runge-Kutta step of x' = field(x).
///
/// `field` is any callable mapping a state to its time derivative; inputs are
/// captured by the callable and held constant over the step (zero-order hold).
/// The step is a pure function of its arguments, so identical inputs give
/// bit-identical outputs.
template <class State, class Field>
State rk4_step(const Field& field, const State& x, double dt) {
  if (!(dt > 0.0)) throw ValidationError("rk4_step requires dt > 0");
  if (!detail::all_finite(x)) throw IntegrationDivergedError("non-finite state before step");
  const State k1 = field(x);
  const State x2 = x + (0.5 * dt) * k1;
  const State k2 = field(x2);
  const State x3 = x + (0.5 * dt) * k2;
  const State k3 = field(x3);
  const State x4 = x + dt * k3;
  const State k4 = field(x4);
  State next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!detail::all_finite(next)) throw IntegrationDivergedError("non-finite state after step");
  return next;
}

/// Advances `steps` fixed RK4 steps.
template <class State, class Field>
State rk4_integrate(const Field& field, State x, double dt, std::size_t steps) {
  for (std::size_t i = 0; i < steps; ++i) x = rk4_step(field, x, dt);
  return x;
}

/// Integrates over `duration` with steps no longer than `max_dt`; the last
/// step lands exactly on `duration`.
template <class State, class Field>
State rk4_integrate_for(const Field& field, State x, double duration, double max_dt) {
  if (duration <= 0.0) return x;
  const auto n = static_cast<std::size_t>(std::ceil(duration / max_dt - 1e-12));
  return rk4_integrate(field, x, duration / static_cast<double>(n == 0 ? 1 : n), n == 0 ? 1 : n);
}

}  // namespace casting
