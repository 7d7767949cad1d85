#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "casting/error.hpp"
#include "casting/optimal/min_time_3d.hpp"

namespace casting::optimal {

struct SweepPoint {
  double alpha = 0.0;
  double t_f = 0.0;
  double miss = 0.0;  ///< max of terminal position error and terminal speed
  bool ok = false;
  std::string status;  ///< "ok" or the failure reason
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::optional<std::size_t> best;  ///< index of the fastest successful angle
  double alpha_opt = 0.0;           ///< refined when refinement ran, else the grid arg-min
  double t_f_opt = std::numeric_limits<double>::infinity();
  MinTime3DSolution solution;       ///< solution at alpha_opt
};

struct SweepOptions {
  MinTime3DOptions solver;
  bool warm_start = true;
  int refine_iterations = 0;  ///< golden-section steps on [best - h, best + h]; 0 keeps the grid value
  double refine_scan_from = 0.9;  ///< refinement scans start at this fraction of the grid optimum
};

/// n angles uniformly covering [0, 2 pi).
inline std::vector<double> uniform_angles(int n) {
  if (n < 1) throw ValidationError("angle grid needs at least one point");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(2.0 * std::numbers::pi * i / n);
  return out;
}

inline SweepResult throwing_angle_sweep(const Caster3DGeometry& geom, double omega0, const Vector3d& target,
                                        const std::vector<double>& angles, const SweepOptions& opt = {}) {
  if (angles.empty()) throw ValidationError("angle grid is empty");
  SweepResult res;
  std::optional<MinTime3DWarmStart> warm;
  std::vector<MinTime3DSolution> sols;
  for (double a : angles) {
    SweepPoint pt;
    pt.alpha = a;
    MinTime3DSolution s;
    try {
      s = min_time_3d(geom, omega0, target, a, opt.solver, opt.warm_start && warm ? &*warm : nullptr);
      pt.ok = s.converged;
      pt.status = s.converged ? "ok" : "infeasible";
    } catch (const Error& e) {
      pt.status = e.what();
      s.t_f = std::numeric_limits<double>::infinity();
    }
    pt.t_f = s.t_f;
    pt.miss = std::max(s.terminal_miss, s.terminal_speed);
    if (pt.ok) {
      warm = MinTime3DWarmStart{s.u_segments, s.t_f};
      if (!res.best || pt.t_f < res.points[*res.best].t_f) res.best = res.points.size();
    }
    res.points.push_back(pt);
    sols.push_back(std::move(s));
  }
  if (!res.best) return res;
  res.alpha_opt = res.points[*res.best].alpha;
  res.t_f_opt = res.points[*res.best].t_f;
  res.solution = sols[*res.best];

  if (opt.refine_iterations > 0 && angles.size() > 1) {
    double h = std::numbers::pi;
    for (std::size_t i = 1; i < angles.size(); ++i) h = std::min(h, std::abs(angles[i] - angles[i - 1]));
    const MinTime3DWarmStart seed{res.solution.u_segments, res.solution.t_f, opt.refine_scan_from};
    const auto eval = [&](double a) {
      try {
        MinTime3DSolution s = min_time_3d(geom, omega0, target, a, opt.solver, &seed);
        if (s.converged && s.t_f < res.t_f_opt) {
          res.t_f_opt = s.t_f;
          res.alpha_opt = std::fmod(a + 2.0 * std::numbers::pi, 2.0 * std::numbers::pi);
          res.solution = s;
          res.solution.alpha0 = res.alpha_opt;
        }
        return s.converged ? s.t_f : std::numeric_limits<double>::infinity();
      } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = res.alpha_opt - h, hi = res.alpha_opt + h;
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = eval(x1), f2 = eval(x2);
    for (int it = 0; it < opt.refine_iterations; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - invphi * (hi - lo);
        f1 = eval(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + invphi * (hi - lo);
        f2 = eval(x2);
      }
    }
  }
  return res;
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& r) {
  os << "angle,t_f,miss,status\n";
  char buf[128];
  for (const auto& p : r.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,", p.alpha, p.t_f, p.miss);
    os << buf << (p.ok ? std::string("ok") : "failed") << '\n';
  }
}

}  // namespace casting::optimal
