#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "casting/control/ballistics.hpp"
#include "casting/sim/rng.hpp"
#include "casting/sim/simulator.hpp"
#include "casting/sim/tool_config.hpp"

using namespace casting;
using namespace casting::sim;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CASTING_TEST_DATA_DIR;
const fs::path kScenarios = CASTING_SCENARIO_DIR;

Scenario regression(const std::string& name) { return load_scenario(kData / ("regression-" + name + ".json")); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trace_text(const std::vector<TraceRecord>& rows) {
  std::ostringstream os;
  write_trace_csv(os, rows);
  return os.str();
}

Scenario parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

bool has_event(const TraceRecord& r, const std::string& name) {
  std::stringstream ss(r.event);
  std::string e;
  while (std::getline(ss, e, ';'))
    if (e == name) return true;
  return false;
}

const std::vector<std::string> kRegressions = {"none", "impulse", "piecewise", "moving"};

}  // namespace

TEST(StreamSeed, FixedHashValuesAndIndependentLabels) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
  EXPECT_NE(stream_seed(1, "vision.noise"), stream_seed(1, "vision.calibration"));
  EXPECT_NE(stream_seed(1, "vision.noise"), stream_seed(2, "vision.noise"));
  EXPECT_EQ(stream_seed(5, "x"), stream_seed(5, "x"));
}

TEST(ScenarioJson, EveryShippedScenarioRoundTrips) {
  int n = 0;
  for (const auto& entry : fs::directory_iterator(kScenarios)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".json" || name.rfind("sweep", 0) == 0 || name.rfind("table", 0) == 0) continue;
    const Scenario s = load_scenario(entry.path());
    const auto j = scenario_to_json(s);
    const Scenario back = scenario_from_json(j);
    EXPECT_EQ(scenario_to_json(back), j) << name;
    ++n;
  }
  EXPECT_GE(n, 6);
}

TEST(ScenarioJson, DefaultsFillOmittedSections) {
  const Scenario s = parse(R"({"schema_version": 1})");
  EXPECT_EQ(s.controller, ControllerKind::impulse);
  EXPECT_EQ(s.target.kind, TargetKind::fixed);
  EXPECT_DOUBLE_EQ(s.target.position.x(), 1.81);
  EXPECT_DOUBLE_EQ(s.timing.dt_control, 5e-4);
  EXPECT_DOUBLE_EQ(s.vision.frame_period, 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(s.target.speed_cap, 0.5);
  EXPECT_DOUBLE_EQ(s.release.margin, 0.1);
  EXPECT_EQ(s.frame_ticks(), 125);
}

TEST(ScenarioJson, MalformedDocumentsAreRejected) {
  EXPECT_THROW(parse(R"({})"), ValidationError);
  EXPECT_THROW(parse(R"({"schema_version": 2})"), ValidationError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "colour": "red"})"), ValidationError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "target": {"kind": "static", "size": 1}})"), ValidationError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "target": {"kind": "teleporting"}})"), ValidationError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "controller": "magic"})"), ValidationError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "seed": "one"})"), ValidationError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "timing": {"dt_control": 0}})"), ValidationError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "vision": {"frame_period": 0.0001}})"), ValidationError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "initial": {"q": [0, 0, -0.5]}})"), ValidationError);
  EXPECT_THROW(parse("{\"schema_version\": 1,"), ValidationError);
}

TEST(ToolConfig, SweepAndTableConfigsLoad) {
  const SweepConfig sw = load_sweep_config(kScenarios / "sweep-3d.json");
  EXPECT_EQ(sw.angles, 36);
  EXPECT_EQ(sw.options.solver.n_seg, 20);
  EXPECT_DOUBLE_EQ(sw.geometry.u_max, 10.0);
  const TableConfig tc = load_table_config(kScenarios / "table-static.json");
  EXPECT_EQ(tc.grid.size(), 120u);
  EXPECT_TRUE(fs::exists(tc.scenario));
  EXPECT_THROW(sweep_config_from_json(nlohmann::json{{"angles", 0}}), ValidationError);
  EXPECT_THROW(table_config_from_json(nlohmann::json::object(), kScenarios), ValidationError);
}

TEST(TargetTrack, SpeedNeverExceedsTheCap) {
  TargetSpec spec;
  spec.kind = TargetKind::constant_velocity;
  spec.velocity = {2.0, -1.0};
  TargetTrack track(spec);
  const double dt = 5e-4;
  Vector2d prev = track.position();
  for (int k = 1; k <= 4000; ++k) {
    track.advance(k * dt, dt, std::nullopt);
    EXPECT_LE((track.position() - prev).norm(), spec.speed_cap * dt * (1.0 + 1e-9));
    prev = track.position();
  }
  EXPECT_TRUE(track.clamped());
  EXPECT_NEAR((track.position() - spec.position).norm(), spec.speed_cap * 2.0, 1e-9);
}

TEST(TargetTrack, SlowTracksAreFollowedExactly) {
  TargetSpec spec;
  spec.kind = TargetKind::waypoints;
  spec.position = {1.5, 0.0};
  spec.waypoints = {{0.0, {1.5, 0.0}}, {1.0, {1.8, 0.0}}, {2.0, {1.8, 0.4}}};
  EXPECT_TRUE(commanded_target(spec, 0.5).isApprox(Vector2d(1.65, 0.0)));
  EXPECT_TRUE(commanded_target(spec, 1.5).isApprox(Vector2d(1.8, 0.2)));
  EXPECT_TRUE(commanded_target(spec, 9.0).isApprox(Vector2d(1.8, 0.4)));
  TargetTrack track(spec);
  for (int k = 1; k <= 2000; ++k) track.advance(k * 1e-3, 1e-3, std::nullopt);
  EXPECT_FALSE(track.clamped());
  EXPECT_TRUE(track.position().isApprox(Vector2d(1.8, 0.4)));
}

TEST(TargetTrack, ThrowClockHoldsUntilRelease) {
  TargetSpec spec;
  spec.kind = TargetKind::constant_velocity;
  spec.clock = TargetClock::release;
  spec.position = {1.7, 0.0};
  spec.velocity = {0.3, 0.0};
  TargetTrack track(spec);
  for (int k = 1; k <= 100; ++k) track.advance(k * 1e-2, 1e-2, std::nullopt);
  EXPECT_EQ(track.position(), spec.position);
  for (int k = 101; k <= 200; ++k) track.advance(k * 1e-2, 1e-2, 1.0);
  EXPECT_NEAR(track.position().x(), 1.7 + 0.3, 1e-12);
}

TEST(Simulator, ClampedTargetIsLoggedOnce) {
  Scenario s = regression("none");
  s.target.kind = TargetKind::constant_velocity;
  s.target.velocity = {-1.0, 0.0};
  const auto r = run_scenario(s);
  int n = 0;
  for (const auto& row : r.trace) n += has_event(row, "target_clamped");
  EXPECT_EQ(n, 1);
}

TEST(Simulator, TraceInvariantsHoldForEveryRegression) {
  for (const auto& name : kRegressions) {
    SCOPED_TRACE(name);
    const Scenario s = regression(name);
    const auto r = run_scenario(s);
    const double dt = s.timing.dt_control;
    ASSERT_FALSE(r.trace.empty());
    EXPECT_EQ(r.trace.back().phase, Phase::terminal);
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
      const auto& row = r.trace[i];
      EXPECT_EQ(row.t, static_cast<double>(i) * dt);
      if (i > 0) {
        EXPECT_GT(row.t, r.trace[i - 1].t);
        EXPECT_GE(static_cast<int>(row.phase), static_cast<int>(r.trace[i - 1].phase));
      }
      EXPECT_GE(row.f3, 0.0);
      EXPECT_GE(row.u_cmd, 0.0);
      EXPECT_LE(row.u_cmd, s.steering.u_max);
    }
  }
}

TEST(Simulator, ObservationsArriveEveryFramePeriodAtTickBoundaries) {
  for (double period : {1.0 / 16.0, 0.062, 0.124}) {
    for (double latency : {0.0, 0.02}) {
      SCOPED_TRACE(period);
      Scenario s = regression("piecewise");
      s.vision.frame_period = period;
      s.vision.latency = latency;
      const long frame = s.frame_ticks();
      EXPECT_EQ(frame, static_cast<long>(std::floor(period / s.timing.dt_control + 1e-9)));
      const long lag = static_cast<long>(std::ceil(latency / s.timing.dt_control - 1e-9));
      const auto r = run_scenario(s);
      std::vector<std::size_t> arrivals;
      for (std::size_t i = 0; i < r.trace.size(); ++i) {
        const auto& o = r.trace[i].obs;
        const auto& prev = i ? r.trace[i - 1].obs : std::optional<TargetObservation>{};
        if (o && (!prev || prev->t != o->t)) {
          arrivals.push_back(i);
          EXPECT_EQ(o->t, r.trace[i - static_cast<std::size_t>(lag)].t);
        }
      }
      ASSERT_GE(arrivals.size(), 3u);
      EXPECT_EQ(arrivals.front(), static_cast<std::size_t>(lag));
      for (std::size_t k = 1; k < arrivals.size(); ++k)
        EXPECT_EQ(arrivals[k] - arrivals[k - 1], static_cast<std::size_t>(frame));
    }
  }
}

TEST(Simulator, IdenticalScenarioGivesIdenticalBytes) {
  const Scenario s = regression("moving");
  EXPECT_EQ(trace_text(run_scenario(s).trace), trace_text(run_scenario(s).trace));
}

TEST(Simulator, OutcomeIsRecomputableFromTheTrace) {
  for (const auto& name : kRegressions) {
    SCOPED_TRACE(name);
    const Scenario s = regression(name);
    const auto r = run_scenario(s);
    const Outcome o = scan_outcome(r.trace, s);
    EXPECT_EQ(o.result, r.outcome.result);
    EXPECT_EQ(o.min_distance, r.outcome.min_distance);
    EXPECT_EQ(o.t_throw, r.outcome.t_throw);
    EXPECT_EQ(o.t_terminal, r.outcome.t_terminal);
    EXPECT_EQ(o.result == Result::caught, o.min_distance <= s.catch_radius);
  }
}

TEST(Replay, CommittedTracesReproduceBitForBit) {
  for (const auto& name : kRegressions) {
    SCOPED_TRACE(name);
    std::ifstream in(kData / ("regression-" + name + ".csv"), std::ios::binary);
    ASSERT_TRUE(in);
    const ReplayReport rep = replay_check(in, regression(name));
    EXPECT_TRUE(rep.match) << "tick " << rep.first_divergent_tick.value_or(0) << "\n" << rep.expected << "\n"
                           << rep.actual;
  }
}

TEST(Replay, PerturbedSeedDivergesAtTheFirstNoisyObservation) {
  Scenario s = regression("impulse");
  s.seed += 1;
  std::ifstream in(kData / "regression-impulse.csv", std::ios::binary);
  const TraceFile tf = read_trace_csv(in);
  std::size_t first_obs = 0;
  while (!tf.rows[first_obs].obs) ++first_obs;
  in.clear();
  in.seekg(0);
  const ReplayReport rep = replay_check(in, s);
  EXPECT_FALSE(rep.match);
  ASSERT_TRUE(rep.first_divergent_tick);
  EXPECT_EQ(*rep.first_divergent_tick, first_obs);
}

TEST(Replay, TruncatedTraceIsAValidationError) {
  const std::string full = read_file(kData / "regression-none.csv");
  const std::string cut_row = full.substr(0, full.size() / 2);
  const std::string cut_line = cut_row.substr(0, cut_row.rfind('\n') + 1);
  for (const auto& text : {cut_row, cut_line}) {
    std::istringstream in(text);
    EXPECT_THROW(replay_check(in, regression("none")), ValidationError);
  }
  std::istringstream bad_header("t,phase\n");
  EXPECT_THROW(read_trace_csv(bad_header), ValidationError);
}

TEST(Replay, EditedTraceReportsTheEditedTick) {
  std::istringstream in0(read_file(kData / "regression-none.csv"));
  const TraceFile tf = read_trace_csv(in0);
  std::vector<TraceRecord> rows = tf.rows;
  rows[700].f3 = std::nextafter(rows[700].f3, 1.0);
  std::istringstream in(trace_text(rows));
  const ReplayReport rep = replay_check(in, regression("none"));
  EXPECT_FALSE(rep.match);
  EXPECT_EQ(rep.first_divergent_tick, std::optional<std::size_t>(700));
}

TEST(Simulator, StaticTargetImpulseFlightIsParabolaThenArc) {
  const Scenario s = load_scenario(kScenarios / "static-impulse.json");
  const auto r = run_scenario(s);
  const Outcome& o = r.outcome;
  EXPECT_EQ(o.result, Result::caught);
  EXPECT_LE(o.min_distance, 0.05);
  ASSERT_TRUE(o.t_throw && o.t_brake);
  EXPECT_GT(*o.t_throw, 5.0);
  EXPECT_LT(*o.t_throw, 15.0);

  const double dt = s.timing.dt_control;
  const double g = s.robot.g;
  const auto& T = r.trace;
  const auto idx = [&](double t) { return static_cast<std::size_t>(std::llround(t / dt)); };
  const std::size_t i_throw = idx(*o.t_throw), i_brake = idx(*o.t_brake);
  const Vector2d anchor = tether_anchor(s.robot, T[i_throw + 1].q[0]);

  // free flight: constant gravitational acceleration, no tether force
  double acc_err = 0.0;
  for (std::size_t i = i_throw + 2; i + 1 < i_brake; ++i) {
    EXPECT_EQ(T[i].f3, 0.0);
    const double ax = (T[i + 1].xde - T[i - 1].xde) / (2 * dt);
    const double ay = (T[i + 1].yde - T[i - 1].yde) / (2 * dt);
    acc_err = std::max(acc_err, std::hypot(ax, ay + g));
  }
  EXPECT_LT(acc_err, 1e-6);

  // braked: a circle about the anchor, radius fixed at the braking instant
  const double radius = (Vector2d(T[i_brake + 1].xe, T[i_brake + 1].ye) - anchor).norm();
  double drift = 0.0;
  for (std::size_t i = i_brake + 1; i < T.size(); ++i)
    drift = std::max(drift, std::abs((Vector2d(T[i].xe, T[i].ye) - anchor).norm() - radius));
  EXPECT_LE(drift, 1e-6);
  EXPECT_GT(T.size() - i_brake, 20u);

  // path curvature switches from the parabola's g vx / v^3 to the circle's 1 / R
  const auto curvature = [&](std::size_t i) {
    const double ax = (T[i + 1].xde - T[i - 1].xde) / (2 * dt);
    const double ay = (T[i + 1].yde - T[i - 1].yde) / (2 * dt);
    const double v = std::hypot(T[i].xde, T[i].yde);
    return (T[i].xde * ay - T[i].yde * ax) / (v * v * v);
  };
  const std::size_t i_f = i_brake - 3;
  const double v_f = std::hypot(T[i_f].xde, T[i_f].yde);
  EXPECT_NEAR(curvature(i_f), -g * T[i_f].xde / (v_f * v_f * v_f), 1e-6);
  EXPECT_NEAR(std::abs(curvature(i_brake + 5)), 1.0 / radius, 0.01 / radius);
}

TEST(Simulator, TargetMovedCloserAfterThrowBrakesEarlier) {
  const Scenario s = load_scenario(kScenarios / "moved-target.json");
  const auto r = run_scenario(s);
  const auto& plans = r.outcome.brake_plans;
  ASSERT_GE(plans.size(), 3u);
  EXPECT_TRUE(std::isfinite(plans.front()));
  EXPECT_LT(plans.back(), plans.front());
  EXPECT_LT(plans[plans.size() / 2], plans.front());
  ASSERT_TRUE(r.outcome.t_brake);
  EXPECT_LT(*r.outcome.t_brake, plans.front());

  const auto fixed = run_scenario(load_scenario(kScenarios / "static-impulse.json"));
  EXPECT_EQ(fixed.outcome.brake_plans.front(), plans.front());
  EXPECT_LT(*r.outcome.t_brake, *fixed.outcome.t_brake);
}

TEST(Simulator, UnsteeredFlightLandsWherePredicted) {
  const Scenario s = regression("none");
  const auto r = run_scenario(s);
  ASSERT_TRUE(r.outcome.release && r.outcome.x_land);
  EXPECT_EQ(r.outcome.reason, "ground");
  const double predicted = control::predict_x_land(*r.outcome.release, s.robot.g);
  EXPECT_NEAR(*r.outcome.x_land, predicted, 1e-3);
  EXPECT_NEAR(*r.outcome.x_land, predicted, 1e-9);
  for (const auto& row : r.trace) EXPECT_NE(row.phase, Phase::steering);
}

TEST(Simulator, ReleaseStateIsTheThrowInstant) {
  const Scenario s = regression("piecewise");
  const auto r = run_scenario(s);
  const PlanarFlightState rel = release_state(s);
  ASSERT_TRUE(r.outcome.release);
  EXPECT_EQ(rel.pos, r.outcome.release->pos);
  EXPECT_EQ(rel.vel, r.outcome.release->vel);
  const auto& row = r.trace[static_cast<std::size_t>(std::llround(*r.outcome.t_throw / s.timing.dt_control))];
  EXPECT_TRUE(has_event(row, "throw"));
  EXPECT_EQ(rel.pos, Vector2d(row.xe, row.ye));
}

TEST(Simulator, ExternalTargetWithoutInputBehavesAsStatic) {
  Scenario s = regression("piecewise");
  const std::string fixed = trace_text(run_scenario(s).trace);
  s.target.kind = TargetKind::external;
  EXPECT_EQ(trace_text(run_scenario(s).trace), fixed);
}

TEST(Simulator, TimesOutWhenNothingIsCaught) {
  Scenario s = regression("none");
  s.initial.reset();
  s.timing.max_duration = 1.0;
  const auto r = run_scenario(s);
  EXPECT_EQ(r.outcome.result, Result::timeout);
  EXPECT_TRUE(has_event(r.trace.back(), "timeout"));
  EXPECT_EQ(r.trace.size(), 2001u);
  EXPECT_FALSE(r.outcome.t_throw);
}

TEST(Simulator, StepAfterTheEndIsRejected) {
  Scenario s = regression("none");
  s.timing.max_duration = 0.01;
  Simulator sim(s);
  sim.run();
  EXPECT_TRUE(sim.done());
  EXPECT_THROW(sim.step(), ValidationError);
}

TEST(Simulator, PerTickComputeFitsTheControlPeriod) {
  const auto r = run_scenario(regression("piecewise"));
  EXPECT_GT(r.outcome.replans, 2);
  // reported rather than enforced on shared machines
  RecordProperty("max_tick_ms", std::to_string(r.outcome.max_tick_ms));
  RecordProperty("max_replan_ms", std::to_string(r.outcome.max_replan_ms));
  EXPECT_LT(r.outcome.max_replan_ms, 62.0);
}
