// Acceptance run: one PASS/FAIL line per criterion, exit status = failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "casting/control/ballistics.hpp"
#include "casting/control/feedback_linearization.hpp"
#include "casting/control/zero_dynamics.hpp"
#include "casting/dynamics.hpp"
#include "casting/integrate.hpp"
#include "casting/optimal/angle_sweep.hpp"
#include "casting/optimal/bang_bang.hpp"
#include "casting/optimal/bang_bang_oracle.hpp"
#include "casting/sim/simulator.hpp"
#include "casting/vision/homography.hpp"
#include "casting/vision/observer.hpp"

using namespace casting;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %-22s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

JointState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ang(-kPi, kPi), len(0.05, 2.0), rate(-5.0, 5.0);
  JointState s;
  s.q = {ang(rng), ang(rng), len(rng)};
  s.qdot = {rate(rng), rate(rng), rate(rng)};
  return s;
}

void dynamics() {
  const auto t0 = std::chrono::steady_clock::now();
  const RobotParams p;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  bool spd = true;
  double passivity = 0.0, jac = 0.0;
  const double h = 1e-6;
  for (int i = 0; i < 10000; ++i) {
    const JointState s = random_state(rng);
    const Matrix3d B = inertia_matrix(p, s.q);
    Eigen::SelfAdjointEigenSolver<Matrix3d> es(B);
    spd = spd && B == B.transpose() && es.eigenvalues().minCoeff() > 0.0;

    const Vector3d v{unit(rng), unit(rng), unit(rng)};
    const Matrix3d Bdot = (inertia_matrix(p, s.q + h * s.qdot) - inertia_matrix(p, s.q - h * s.qdot)) / (2 * h);
    passivity = std::max(passivity, std::abs(v.dot((Bdot - 2.0 * coriolis_matrix(p, s.q, s.qdot)) * v)));

    const Matrix3d J = jacobian(p, s);
    for (int k = 0; k < 3; ++k) {
      JointState sp = s, sm = s;
      sp.q[k] += h;
      sm.q[k] -= h;
      const auto a = forward_kinematics(p, sp), b = forward_kinematics(p, sm);
      const Vector3d col{(a.x - b.x) / (2 * h), (a.y - b.y) / (2 * h), (a.phi - b.phi) / (2 * h)};
      jac = std::max(jac, (col - J.col(k)).norm() / std::max(1.0, J.col(k).norm()));
    }
  }
  const double secs = seconds_since(t0);
  report("dynamics", spd && passivity <= 1e-9 && jac <= 1e-6 && secs < 10.0,
         fmt("B SPD on 1e4 states: %s; max |v'(Bdot-2C)v| %.2e; Jacobian rel err %.2e; %.2f s", spd ? "yes" : "no",
             passivity, jac, secs));
}

void linearization() {
  const RobotParams p;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> ang(-kPi, kPi), len(0.05, 2.5), rate(-6.0, 6.0), cmd(-60.0, 60.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    JointState s;
    s.q = {ang(rng), ang(rng), len(rng)};
    s.qdot = {rate(rng), rate(rng), rate(rng)};
    const double u2 = cmd(rng), u3 = cmd(rng);
    const auto c = control::linearizing_feedback(p, s, u2, u3);
    // pushing commands are evaluated too, so solve the full model directly
    const DynMatrices dm = eval_dynamics_matrices(p, s);
    const Vector3d qdd = dm.B.ldlt().solve(Vector3d(c.tau1, 0.0, -c.f3) - dm.C * s.qdot - dm.G);
    worst = std::max(worst, std::abs(qdd[1] - u2) + std::abs(qdd[2] - u3));
  }
  report("linearization", worst <= 1e-9, fmt("max |q2dd-u2|+|q3dd-u3| over 1e3 states %.2e", worst));
}

void zero_dynamics() {
  const RobotParams p;
  const double beta = control::zero_dynamics_beta(p);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> q(-kPi, kPi), qd(-3.0, 3.0);
  const double dt = 5e-3;
  const int steps = static_cast<int>(60.0 / dt);
  int monotone = 0, converged = 0;
  double worst_rise = 0.0;
  for (int k = 0; k < 50; ++k) {
    Eigen::Vector2d x{q(rng), qd(rng)};
    std::vector<control::ZeroDynamicsSample> traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) {
      traj.push_back({i * dt, std::remainder(x[0], 2 * kPi), x[1]});
      if (std::abs(traj.back().q1) >= kPi) traj.back().q1 = 0.0;  // measure-zero wrap edge
      x = rk4_step([&](const Eigen::Vector2d& z) { return control::zero_dynamics_field(beta, z); }, x, dt);
    }
    const auto r = control::zero_dynamics_check(p, traj);
    monotone += r.V_monotone;
    worst_rise = std::max(worst_rise, r.max_V_increase);
    converged += r.V.back() <= 0.01 * r.V.front();
  }
  report("zero-dynamics", monotone == 50 && converged == 50,
         fmt("V non-increasing on %d/50 runs (largest step rise %.3g); converged within 60 s on %d/50", monotone,
             worst_rise, converged));
}

double integrated_landing(const PlanarFlightState& fs, double g) {
  const auto field = [&](const Vector4d& x) { return planar_flight_field(x, fs.anchor, 1.0, g, 0.0); };
  const double dt = 5e-4;
  Vector4d x = fs.packed();
  for (int i = 0; i < 200000; ++i) {
    const Vector4d next = rk4_step(field, x, dt);
    if (next[1] < 0.0) {
      double lo = 0.0, hi = dt;
      for (int j = 0; j < 80; ++j) {
        const double mid = 0.5 * (lo + hi);
        (rk4_step(field, x, mid)[1] >= 0.0 ? lo : hi) = mid;
      }
      return rk4_step(field, x, lo)[0];
    }
    x = next;
  }
  return NAN;
}

void x_land() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> x0(-1.0, 1.0), y0(0.0, 2.0), v(-4.0, 4.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PlanarFlightState fs{{x0(rng), y0(rng)}, {v(rng), v(rng)}, {5.0, 5.0}};
    worst = std::max(worst, std::abs(control::predict_x_land(fs, 9.81) - integrated_landing(fs, 9.81)));
  }
  report("x-land", worst <= 1e-6, fmt("max |formula - integrated| over 1e3 launches %.2e m", worst));
}

void impulse_static(const fs::path& scenarios) {
  const sim::Scenario s = sim::load_scenario(scenarios / "static-impulse.json");
  const auto r = sim::run_scenario(s);
  const auto& o = r.outcome;
  double drift = INFINITY;
  double accel = INFINITY;
  if (o.t_throw && o.t_brake) {
    const double dt = s.timing.dt_control;
    const auto& T = r.trace;
    const auto i_throw = static_cast<std::size_t>(std::llround(*o.t_throw / dt));
    const auto i_brake = static_cast<std::size_t>(std::llround(*o.t_brake / dt));
    const Vector2d anchor = tether_anchor(s.robot, T[i_throw + 1].q[0]);
    accel = 0.0;
    for (std::size_t i = i_throw + 2; i + 1 < i_brake; ++i)
      accel = std::max(accel, std::hypot((T[i + 1].xde - T[i - 1].xde) / (2 * dt),
                                         (T[i + 1].yde - T[i - 1].yde) / (2 * dt) + s.robot.g));
    const double radius = (Vector2d(T[i_brake + 1].xe, T[i_brake + 1].ye) - anchor).norm();
    drift = 0.0;
    for (std::size_t i = i_brake + 1; i < T.size(); ++i)
      drift = std::max(drift, std::abs((Vector2d(T[i].xe, T[i].ye) - anchor).norm() - radius));
  }
  const bool caught = o.result == sim::Result::caught && o.min_distance <= 0.05;
  report("impulse-static", caught && accel < 1e-6 && drift <= 1e-6,
         fmt("%s at %.4f m; free-flight |a+g| %.1e; radius drift after brake %.1e m", sim::result_name(o.result),
             o.min_distance, accel, drift));
}

void impulse_moved(const fs::path& scenarios) {
  const auto r = sim::run_scenario(sim::load_scenario(scenarios / "moved-target.json"));
  const auto& plans = r.outcome.brake_plans;
  const bool ok = plans.size() >= 2 && std::isfinite(plans.front()) && plans.back() < plans.front();
  report("impulse-moved", ok,
         plans.empty() ? std::string("no plans")
                       : fmt("t_b first plan %.5f s, last plan %.5f s (%zu plans)", plans.front(), plans.back(),
                             plans.size()));
}

void piecewise_rate() {
  int impulse = 0, piecewise = 0;
  double max_replan = 0.0;
  const int n = 50;
  for (int k = 0; k < n; ++k) {
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(k));
    std::uniform_real_distribution<double> x(1.5, 2.1), v(-0.5, 0.5);
    sim::Scenario s;
    s.seed = static_cast<std::uint64_t>(k) + 1;
    s.target.kind = sim::TargetKind::constant_velocity;
    s.target.clock = sim::TargetClock::release;
    s.target.position = {x(rng), 0.0};
    s.target.velocity = {v(rng), 0.0};
    s.controller = sim::ControllerKind::impulse;
    impulse += sim::run_scenario(s).outcome.result == sim::Result::caught;
    s.controller = sim::ControllerKind::piecewise;
    const auto o = sim::run_scenario(s).outcome;
    piecewise += o.result == sim::Result::caught;
    max_replan = std::max(max_replan, o.max_replan_ms);
  }
  const bool ok = piecewise >= 0.8 * n && piecewise > impulse && max_replan <= 62.0;
  report("piecewise-rate", ok,
         fmt("piecewise caught %d/%d, impulse %d/%d; max replan %.2f ms", piecewise, n, impulse, n, max_replan));
}

void min_time_1d() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_gap = 0.0, worst_sim = 0.0;
  bool feasible = true;
  for (int i = 0; i < 20; ++i) {
    const double m = 0.5 + 1.5 * unit(rng);
    const double u_max = 0.5 + 1.5 * unit(rng);
    const optimal::LineState xi0{-2.0 + 4.0 * unit(rng), -2.0 + 4.0 * unit(rng)};
    const double x_t = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.2 + 1.8 * unit(rng));
    const auto plan = optimal::bangbang_min_time(m, u_max, xi0, x_t);
    feasible = feasible && plan.feasible;
    if (!plan.feasible) continue;
    const auto oracle = optimal::bangbang_oracle(m, u_max, xi0, x_t);
    worst_gap = std::max(worst_gap, std::abs(plan.t_f - oracle.t_f) / oracle.t_f);
    const auto end = optimal::simulate_plan(plan, m, xi0, 1e-3);
    worst_sim = std::max(worst_sim, std::max(std::abs(end.x - x_t), std::abs(end.v)));
  }
  report("min-time-1d", feasible && worst_gap <= 0.01 && worst_sim <= 1e-6,
         fmt("20 instances: max gap to oracle %.3f%%, max simulated terminal error %.1e", 100 * worst_gap,
             worst_sim));
}

Vector3d rotate_z(const Vector3d& p, double th) {
  return {std::cos(th) * p.x() - std::sin(th) * p.y(), std::sin(th) * p.x() + std::cos(th) * p.y(), p.z()};
}

void sweep_3d() {
  const Caster3DGeometry geom;  // m = 1 kg, u in [0, 10] N
  const double omega0 = 10.0;
  const Vector3d target{2.0, 0.0, -1.0};
  optimal::SweepOptions opt;
  opt.refine_iterations = 12;

  const auto t0 = std::chrono::steady_clock::now();
  const auto full = optimal::throwing_angle_sweep(geom, omega0, target, optimal::uniform_angles(36), opt);
  const double secs = seconds_since(t0);
  const double off = std::abs(std::remainder(full.alpha_opt - 3.0 * kPi / 4.0, 2 * kPi));

  double lo = INFINITY, hi = 0.0;
  for (double az : {0.0, 1.0, 2.5}) {
    const auto r = optimal::throwing_angle_sweep(geom, omega0, rotate_z(target, az), optimal::uniform_angles(12), opt);
    lo = std::min(lo, r.t_f_opt);
    hi = std::max(hi, r.t_f_opt);
  }
  const double spread = (hi - lo) / lo;
  report("sweep-3d", full.best && off <= 0.2 && spread <= 1e-3 && secs <= 600.0,
         fmt("optimal angle %.3f rad (3pi/4 = %.3f, off by %.3f); t_f %.4f s; azimuth spread %.4f%%; sweep %.0f s",
             full.alpha_opt, 3.0 * kPi / 4.0, off, full.t_f_opt, 100 * spread, secs));
}

std::vector<Vector2d> plane_points(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x(0.0, 2.4), y(-0.4, 1.2);
  std::vector<Vector2d> out;
  for (int i = 0; i < n; ++i) out.emplace_back(x(rng), y(rng));
  return out;
}

void homography() {
  const vision::PinholeCamera cam;
  const vision::Homography truth = cam.image_to_world();
  const vision::Homography w2i = cam.world_to_image();
  std::vector<vision::Correspondence> exact;
  for (const auto& p : plane_points(12, 3)) exact.push_back({w2i.apply(p), p});
  const Matrix3d h = vision::estimate_homography(exact).h.matrix();
  const double recovery = (h - truth.matrix()).norm() / truth.matrix().norm();

  const auto test = plane_points(200, 11);
  double ss = 0.0;
  const int trials = 200;
  for (int k = 0; k < trials; ++k) {
    const auto batch = vision::synth_calibration(cam, plane_points(12, 300 + static_cast<std::uint64_t>(k)), 0.5,
                                                 true, 3000 + static_cast<std::uint64_t>(k));
    const auto est = vision::estimate_homography(batch).h;
    double e = 0.0;
    for (const auto& p : test) e += (est.apply(w2i.apply(p)) - p).squaredNorm();
    ss += e / static_cast<double>(test.size());
  }
  const double rms = std::sqrt(ss / trials);
  report("homography", recovery <= 1e-9 && rms <= 4e-3,
         fmt("noiseless relative error %.1e; world RMS %.2f mm (12 markers, 0.5 px, camera at 3 m)", recovery,
             1e3 * rms));
}

void determinism(const fs::path& data) {
  int total = 0, matched = 0;
  std::string first_bad;
  for (const auto& e : fs::directory_iterator(data)) {
    if (e.path().extension() != ".csv" || e.path().filename().string().rfind("regression-", 0) != 0) continue;
    ++total;
    fs::path scenario = e.path();
    scenario.replace_extension(".json");
    std::ifstream in(e.path(), std::ios::binary);
    try {
      const auto rep = sim::replay_check(in, sim::load_scenario(scenario));
      if (rep.match)
        ++matched;
      else if (first_bad.empty())
        first_bad = fmt("; %s diverges at tick %zu", e.path().filename().c_str(), *rep.first_divergent_tick);
    } catch (const Error& err) {
      if (first_bad.empty()) first_bad = std::string("; ") + err.what();
    }
  }
  report("determinism", total > 0 && matched == total,
         fmt("%d/%d committed traces replay bit for bit", matched, total) + first_bad);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string scenarios = CASTING_SCENARIO_DIR, data = CASTING_TEST_DATA_DIR;
  std::vector<std::string> only;
  app.add_option("--scenarios", scenarios, "Scenario directory");
  app.add_option("--data", data, "Regression trace directory");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::set<std::string> pick(only.begin(), only.end());
  const auto want = [&](const char* n) { return pick.empty() || pick.count(n) > 0; };
  try {
    if (want("dynamics")) dynamics();
    if (want("linearization")) linearization();
    if (want("zero-dynamics")) zero_dynamics();
    if (want("x-land")) x_land();
    if (want("impulse-static")) impulse_static(scenarios);
    if (want("impulse-moved")) impulse_moved(scenarios);
    if (want("piecewise-rate")) piecewise_rate();
    if (want("min-time-1d")) min_time_1d();
    if (want("sweep-3d")) sweep_3d();
    if (want("homography")) homography();
    if (want("determinism")) determinism(data);
  } catch (const std::exception& e) {
    std::printf("FAIL  aborted                %s\n", e.what());
    return 1 + failures;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
