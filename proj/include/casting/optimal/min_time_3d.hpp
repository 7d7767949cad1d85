#pragma once

// Minimum-time steering of the three-cable caster by direct transcription:
// each cable force is piecewise constant on n_seg uniform segments of
// [0, t_f]. For a fixed t_f the terminal conditions (position = target,
// velocity = 0) are solved by a box-projected Levenberg-Marquardt iteration
// on the exact sensitivities of the discrete RK4 map; t_f itself is found by
// scanning upwards to the first feasible value and bisecting.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "casting/error.hpp"
#include "casting/flight.hpp"

namespace casting::optimal {

struct MinTime3DOptions {
  int n_seg = 20;
  int substeps = 8;             ///< RK4 steps per segment
  double residual_tol = 1e-6;   ///< terminal |position error| and |velocity| [m, m/s]
  double t_rel_tol = 1e-4;      ///< relative bracket width on t_f
  double t_start = 0.05;        ///< floor for the first trial duration of a cold scan [s]
  double t_max = 20.0;
  double scan_ratio = 1.05;
  int lm_max_iter = 80;
  int lm_polish_iter = 400;     ///< iteration cap while shrinking t_f from a feasible solution
  /// Uniform force levels (fractions of u_max) tried as extra starting points
  /// whenever the continuation start fails at a trial duration.
  std::vector<double> seed_levels{0.1, 0.5, 1.0};
  int random_seeds = 0;          ///< extra uniformly random starting points
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (n_seg < 1 || substeps < 1) throw ValidationError("n_seg and substeps must be >= 1");
    if (!(residual_tol > 0 && t_rel_tol > 0 && t_start > 0 && t_max > t_start && scan_ratio > 1))
      throw ValidationError("invalid minimum-time options");
  }
};

struct MinTime3DSolution {
  double alpha0 = 0.0;
  std::vector<Vector3d> u_segments;
  double t_f = 0.0;
  double terminal_miss = 0.0;   ///< |p(t_f) - target|
  double terminal_speed = 0.0;  ///< |v(t_f)|
  bool converged = false;
  int lm_solves = 0;
};

namespace min_time_detail {

using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

struct Problem {
  Caster3DGeometry geom;
  std::array<Vector3d, 3> anchors;
  Vec6 x0;
  Vector3d target;
  int n_seg;
  int substeps;
};

inline Vec6 field(const Problem& pr, const Vec6& x, const Vector3d& u) {
  Vec6 d;
  d.head<3>() = x.tail<3>();
  Vector3d a(0.0, 0.0, -pr.geom.g);
  for (int i = 0; i < 3; ++i) {
    const Vector3d r = x.head<3>() - pr.anchors[static_cast<std::size_t>(i)];
    const double n = r.norm();
    if (n < kCoincidenceTol) throw DegenerateGeometryError("end-effector at cable anchor");
    a -= u[i] / pr.geom.m * r / n;
  }
  d.tail<3>() = a;
  return d;
}

/// Derivative of the state and of its sensitivity to the active segment's
/// forces (3 columns) plus the sensitivity block carried from earlier segments.
inline void field_with_sens(const Problem& pr, const Vec6& x, const Vector3d& u, const Mat6X& S,
                            int col0, Vec6& dx, Mat6X& dS) {
  dx.head<3>() = x.tail<3>();
  Vector3d a(0.0, 0.0, -pr.geom.g);
  Eigen::Matrix3d dadp = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d dadu;
  for (int i = 0; i < 3; ++i) {
    const Vector3d r = x.head<3>() - pr.anchors[static_cast<std::size_t>(i)];
    const double n = r.norm();
    if (n < kCoincidenceTol) throw DegenerateGeometryError("end-effector at cable anchor");
    const Vector3d e = r / n;
    a -= u[i] / pr.geom.m * e;
    dadu.col(i) = -e / pr.geom.m;
    dadp -= u[i] / pr.geom.m * (Eigen::Matrix3d::Identity() - e * e.transpose()) / n;
  }
  dx.tail<3>() = a;
  dS.resize(6, S.cols());
  dS.topRows<3>() = S.bottomRows<3>();
  dS.bottomRows<3>() = dadp * S.topRows<3>();
  dS.bottomRows<3>().middleCols<3>(col0) += dadu;
}

/// Propagates to tau = 1 with duration T. With `sens`, also returns the 6 x
/// 3n_seg Jacobian of the terminal state with respect to the forces.
inline Vec6 propagate(const Problem& pr, const std::vector<Vector3d>& u, double T, Mat6X* sens) {
  const double h = T / (pr.n_seg * pr.substeps);
  Vec6 x = pr.x0;
  Mat6X S;
  if (sens) S = Mat6X::Zero(6, 3 * pr.n_seg);
  for (int j = 0; j < pr.n_seg; ++j) {
    const Vector3d& uj = u[static_cast<std::size_t>(j)];
    for (int k = 0; k < pr.substeps; ++k) {
      if (!sens) {
        const Vec6 k1 = field(pr, x, uj);
        const Vec6 k2 = field(pr, x + 0.5 * h * k1, uj);
        const Vec6 k3 = field(pr, x + 0.5 * h * k2, uj);
        const Vec6 k4 = field(pr, x + h * k3, uj);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        continue;
      }
      // only columns of segments 0..j are non-zero
      const int cols = 3 * (j + 1);
      const Mat6X Sa = S.leftCols(cols);
      Vec6 k1, k2, k3, k4;
      Mat6X K1, K2, K3, K4;
      field_with_sens(pr, x, uj, Sa, 3 * j, k1, K1);
      field_with_sens(pr, x + 0.5 * h * k1, uj, Sa + 0.5 * h * K1, 3 * j, k2, K2);
      field_with_sens(pr, x + 0.5 * h * k2, uj, Sa + 0.5 * h * K2, 3 * j, k3, K3);
      field_with_sens(pr, x + h * k3, uj, Sa + h * K3, 3 * j, k4, K4);
      x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      S.leftCols(cols) += h / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
    }
  }
  if (!x.allFinite()) throw IntegrationDivergedError("non-finite state in transcription");
  if (sens) *sens = std::move(S);
  return x;
}

inline Vec6 residual(const Problem& pr, const Vec6& xT) {
  Vec6 r = xT;
  r.head<3>() -= pr.target;
  return r;
}

inline double res_norm(const Vec6& r) { return std::max(r.head<3>().norm(), r.tail<3>().norm()); }

struct FixedTime {
  std::vector<Vector3d> u;
  double res = std::numeric_limits<double>::infinity();
  bool feasible = false;
};

/// Box-projected Levenberg-Marquardt on the 6 terminal equations for fixed T.
/// Steps are minimum-norm over the forces not pinned at a bound.
inline FixedTime solve_fixed_time(const Problem& pr, double T, std::vector<Vector3d> u, double u_max,
                                  double tol, int max_iter) {
  FixedTime out;
  const int P = 3 * pr.n_seg;
  Mat6X J;
  Vec6 r;
  try {
    r = residual(pr, propagate(pr, u, T, &J));
  } catch (const Error&) {
    out.u = std::move(u);
    return out;
  }
  double lambda = 1e-6;
  for (int it = 0; it < max_iter && res_norm(r) > tol; ++it) {
    const Eigen::VectorXd g = J.transpose() * r;
    Mat6X Jf = J;
    for (int i = 0; i < P; ++i) {
      const double ui = u[static_cast<std::size_t>(i / 3)][i % 3];
      if ((ui <= 0.0 && g[i] > 0.0) || (ui >= u_max && g[i] < 0.0)) Jf.col(i).setZero();
    }
    const Eigen::Matrix<double, 6, 6> JJt = Jf * Jf.transpose();
    bool accepted = false;
    while (!accepted && lambda < 1e12) {
      const Eigen::Matrix<double, 6, 6> M =
          JJt + lambda * (JJt.diagonal().maxCoeff() + 1e-12) * Eigen::Matrix<double, 6, 6>::Identity();
      const Eigen::VectorXd step = -Jf.transpose() * M.ldlt().solve(r);
      std::vector<Vector3d> trial = u;
      for (int i = 0; i < P; ++i) {
        double& ti = trial[static_cast<std::size_t>(i / 3)][i % 3];
        ti = std::clamp(ti + step[i], 0.0, u_max);
      }
      try {
        const Vec6 rt = residual(pr, propagate(pr, trial, T, nullptr));
        if (rt.norm() < r.norm()) {
          u = std::move(trial);
          r = residual(pr, propagate(pr, u, T, &J));
          lambda = std::max(lambda / 4.0, 1e-9);
          accepted = true;
          continue;
        }
      } catch (const Error&) {
      }
      lambda *= 5.0;
    }
    if (!accepted) break;
  }
  out.res = res_norm(r);
  out.feasible = out.res <= tol;
  out.u = std::move(u);
  return out;
}

}  // namespace min_time_detail

/// Lower bound on t_f: along the line from the start to the target the motion
/// is a double integrator whose acceleration is at most 3 u_max / m + g.
inline double min_time_lower_bound(const Caster3DGeometry& geom, const Flight3DState& s0, const Vector3d& target) {
  const Vector3d d = target - s0.p;
  const double dist = d.norm();
  if (dist == 0.0) return 0.0;
  const double a = 3.0 * geom.u_max / geom.m + geom.g;
  const double v = std::max(0.0, s0.v.dot(d) / dist);
  if (v * v / (2.0 * a) >= dist) return v / a;
  const double peak = std::sqrt(a * dist + 0.5 * v * v);
  return (2.0 * peak - v) / a;
}

/// Optional warm start: forces from a nearby problem, tried as an extra
/// starting point at every trial duration.
struct MinTime3DWarmStart {
  std::vector<Vector3d> u_segments;
  double t_f = 0.0;
  /// When positive, the scan starts at this fraction of t_f (if above the
  /// lower bound); for small perturbations of a solved problem.
  double scan_from = 0.0;
};

inline MinTime3DSolution min_time_3d(const Caster3DGeometry& geom, double omega0, const Vector3d& target,
                                     double alpha0, const MinTime3DOptions& opt = {},
                                     const MinTime3DWarmStart* warm = nullptr) {
  using namespace min_time_detail;
  geom.validate();
  opt.validate();
  if (target.norm() < kCoincidenceTol) throw ValidationError("target at the origin");
  const Flight3DState s0 = throw_state_3d(geom, alpha0, omega0);
  Problem pr{geom, cable_anchors(geom, alpha0), Vec6::Zero(), target, opt.n_seg, opt.substeps};
  pr.x0 << s0.p, s0.v;

  MinTime3DSolution sol;
  sol.alpha0 = alpha0;
  std::vector<Vector3d> u(static_cast<std::size_t>(opt.n_seg), Vector3d::Constant(0.5 * geom.u_max));
  if (warm && static_cast<int>(warm->u_segments.size()) != opt.n_seg) warm = nullptr;

  const auto solve = [&](double T, const std::vector<Vector3d>& start, int iters, bool reseed = true) {
    ++sol.lm_solves;
    FixedTime f = solve_fixed_time(pr, T, start, geom.u_max, opt.residual_tol, iters);
    if (!reseed) return f;
    for (double level : opt.seed_levels) {
      if (f.feasible) break;
      ++sol.lm_solves;
      const std::vector<Vector3d> seed(start.size(), Vector3d::Constant(level * geom.u_max));
      FixedTime g = solve_fixed_time(pr, T, seed, geom.u_max, opt.residual_tol, opt.lm_max_iter);
      if (g.res < f.res) f = std::move(g);
    }
    std::mt19937_64 rng(opt.rng_seed);
    std::uniform_real_distribution<double> unit(0.0, geom.u_max);
    for (int k = 0; k < opt.random_seeds && !f.feasible; ++k) {
      ++sol.lm_solves;
      std::vector<Vector3d> seed(start.size());
      for (auto& v : seed) v = {unit(rng), unit(rng), unit(rng)};
      FixedTime g = solve_fixed_time(pr, T, seed, geom.u_max, opt.residual_tol, opt.lm_max_iter);
      if (g.res < f.res) f = std::move(g);
    }
    return f;
  };

  // Scan upwards from the lower bound; every trial starts from the previous
  // trial's least-squares forces, then from the warm forces, then the seeds.
  double lo = 0.0, hi = 0.0;
  FixedTime best;
  double t0 = std::max(opt.t_start, min_time_lower_bound(geom, s0, target));
  if (warm && warm->scan_from > 0.0) t0 = std::max(t0, warm->scan_from * warm->t_f);
  for (double T = t0; T <= opt.t_max; T *= opt.scan_ratio) {
    FixedTime f = solve(T, u, opt.lm_max_iter, !warm);
    if (!f.feasible && warm) {
      FixedTime g = solve(T, warm->u_segments, opt.lm_max_iter);
      if (g.res < f.res) f = std::move(g);
    }
    if (f.feasible) {
      hi = T;
      best = std::move(f);
      break;
    }
    lo = T;
    u = std::move(f.u);
  }
  if (hi == 0.0) {
    sol.u_segments = u;
    sol.t_f = std::numeric_limits<double>::infinity();
    const Vec6 r = residual(pr, propagate(pr, u, opt.t_max, nullptr));
    sol.terminal_miss = r.head<3>().norm();
    sol.terminal_speed = r.tail<3>().norm();
    return sol;
  }
  // Shrink t_f from the feasible side, each trial warm-started from the last
  // feasible forces; the step grows after a success and halves after a failure.
  double step = std::max(0.5 * (hi - lo) / hi, 2.0 * opt.t_rel_tol);
  while (step >= opt.t_rel_tol) {
    const double T = hi * (1.0 - step);
    FixedTime f = solve(T, best.u, opt.lm_polish_iter, false);
    if (f.feasible) {
      hi = T;
      best = std::move(f);
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }

  sol.u_segments = best.u;
  sol.t_f = hi;
  const Vec6 r = residual(pr, propagate(pr, best.u, hi, nullptr));
  sol.terminal_miss = r.head<3>().norm();
  sol.terminal_speed = r.tail<3>().norm();
  sol.converged = true;
  return sol;
}

/// Forward simulation of a transcribed solution at `substeps` RK4 steps per
/// segment through flight_accel_3d.
inline Flight3DState simulate_min_time_3d(const Caster3DGeometry& geom, double omega0,
                                          const MinTime3DSolution& sol, int substeps) {
  Flight3DState s = throw_state_3d(geom, sol.alpha0, omega0);
  const double h = sol.t_f / (static_cast<double>(sol.u_segments.size()) * substeps);
  Eigen::Matrix<double, 6, 1> x;
  x << s.p, s.v;
  for (const Vector3d& u : sol.u_segments) {
    const auto f = [&](const Eigen::Matrix<double, 6, 1>& z) {
      Eigen::Matrix<double, 6, 1> d;
      d << z.tail<3>(), flight_accel_3d(geom, {z.head<3>(), z.tail<3>()}, sol.alpha0, u);
      return d;
    };
    for (int k = 0; k < substeps; ++k) {
      const auto k1 = f(x);
      const auto k2 = f(x + 0.5 * h * k1);
      const auto k3 = f(x + 0.5 * h * k2);
      const auto k4 = f(x + h * k3);
      x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return {x.head<3>(), x.tail<3>()};
}

}  // namespace casting::optimal
