#pragma once

// Visual-feedback steering with a piecewise-constant tether force: every new
// target observation opens a segment whose force is the best constant force
// from the current flight state.

#include <optional>
#include <string>
#include <vector>

#include "casting/control/constant_force.hpp"
#include "casting/control/lookup_table.hpp"
#include "casting/error.hpp"
#include "casting/observation.hpp"

namespace casting::control {

struct ForceSegment {
  double t_start = 0.0;
  double u = 0.0;
};

class ForceSchedule {
 public:
  explicit ForceSchedule(double u_max) : u_max_(u_max) {
    if (!(u_max > 0)) throw ValidationError("u_max must be positive");
  }

  void append(double t_start, double u) {
    if (!segments_.empty() && !(t_start > segments_.back().t_start))
      throw ValidationError("segment start times must increase strictly");
    if (u < 0.0 || u > u_max_) throw UnilateralInputError("segment force outside [0, u_max]");
    segments_.push_back({t_start, u});
  }

  /// Force in effect at time t (zero before the first segment).
  double at(double t) const {
    double u = 0.0;
    for (const auto& s : segments_) {
      if (s.t_start > t) break;
      u = s.u;
    }
    return u;
  }

  const std::vector<ForceSegment>& segments() const { return segments_; }
  bool empty() const { return segments_.empty(); }
  double u_max() const { return u_max_; }

 private:
  double u_max_;
  std::vector<ForceSegment> segments_;
};

struct ReplanReport {
  ConstantForceResult result;
  bool warm_from_table = false;
  bool fallback = false;  ///< optimizer failed, previous force kept
  std::string error;
};

/// Appends one segment starting at obs.t. The search is warm-started from
/// whichever of the table's nearest cell and the previous segment's force
/// predicts the smaller miss; with neither available it runs cold.
inline ReplanReport replan_on_measurement(const FlightModel& model, const PlanarFlightState& fs,
                                          const TargetObservation& obs, const LookupTable* table,
                                          ForceSchedule& schedule,
                                          const ConstantForceOptions& opt = {}) {
  if (!schedule.empty() && !(obs.t > schedule.segments().back().t_start))
    throw ValidationError("observation is not newer than the last segment");
  const double u_max = schedule.u_max();
  ReplanReport rep;
  try {
    std::optional<double> warm;
    double warm_miss = 0.0;
    if (table != nullptr) {
      const LookupCell& cell = table->query(obs.p);
      if (cell.reachable) {
        warm = std::min(cell.u, u_max);
        warm_miss = predict_approach(model, fs, obs.p, *warm).miss;
        rep.warm_from_table = true;
      }
    }
    if (!schedule.empty()) {
      const double prev = schedule.segments().back().u;
      const double miss = predict_approach(model, fs, obs.p, prev).miss;
      if (!warm || miss < warm_miss) {
        warm = prev;
        rep.warm_from_table = false;
      }
    }
    rep.result = constant_force_opt(model, fs, obs.p, u_max, warm, opt);
  } catch (const Error& e) {
    rep.fallback = true;
    rep.error = e.what();
    rep.result.u = schedule.empty() ? 0.0 : schedule.segments().back().u;
    rep.result.converged = false;
  }
  schedule.append(obs.t, rep.result.u);
  return rep;
}

}  // namespace casting::control
