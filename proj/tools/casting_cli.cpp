#include <signal.h>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "casting/live/server.hpp"
#include "casting/sim/simulator.hpp"
#include "casting/sim/tool_config.hpp"
#include "casting/vision/homography.hpp"

namespace {

using namespace casting;

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw ValidationError("cannot write " + path);
  return file;
}

std::string opt_num(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

int simulate(const std::string& scenario_path, const std::string& trace_path) {
  const sim::Scenario s = sim::load_scenario(scenario_path);
  const sim::RunResult r = sim::run_scenario(s);
  if (!trace_path.empty()) {
    std::ofstream f;
    sim::write_trace_csv(open_out(trace_path, f), r.trace);
  }
  const auto& o = r.outcome;
  std::printf("scenario     %s\n", s.name.c_str());
  std::printf("result       %s (%s)\n", sim::result_name(o.result), o.reason.c_str());
  std::printf("min_distance %.6f m\n", o.min_distance);
  std::printf("t_throw      %s s\n", opt_num(o.t_throw).c_str());
  std::printf("t_brake      %s s\n", opt_num(o.t_brake).c_str());
  std::printf("t_terminal   %.6f s\n", o.t_terminal);
  std::printf("x_land       %s m\n", opt_num(o.x_land).c_str());
  std::printf("replans      %d (max %.2f ms)\n", o.replans, o.max_replan_ms);
  std::printf("max tick     %.3f ms\n", o.max_tick_ms);
  return 0;
}

int sweep(const std::string& config_path, const std::string& out_path) {
  const sim::SweepConfig c = sim::load_sweep_config(config_path);
  const auto res = optimal::throwing_angle_sweep(c.geometry, c.omega0, c.target, optimal::uniform_angles(c.angles),
                                                 c.options);
  std::ofstream f;
  optimal::write_sweep_csv(open_out(out_path, f), res);
  if (res.best)
    std::fprintf(stderr, "optimal angle %.4f rad, t_f %.4f s\n", res.alpha_opt, res.t_f_opt);
  else
    std::fprintf(stderr, "no angle reached the target\n");
  return res.best ? 0 : 1;
}

int build_table(const std::string& config_path, const std::string& out_path) {
  const sim::TableConfig c = sim::load_table_config(config_path);
  const sim::Scenario s = sim::load_scenario(c.scenario);
  const PlanarFlightState release = sim::release_state(s);
  const auto table = control::build_lookup_table(s.flight_model(), release, c.grid, s.steering.u_max);
  std::ofstream f;
  control::write_lookup_table(open_out(out_path, f), table);
  std::size_t reachable = 0;
  for (const auto& cell : table.cells) reachable += cell.reachable;
  std::fprintf(stderr, "%zu of %zu cells reachable, max neighbour jump %.4f N\n", reachable, table.cells.size(),
               table.max_neighbor_jump());
  return 0;
}

int calibrate(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ValidationError("cannot open " + csv_path);
  const auto batch = vision::read_correspondences_csv(in);
  const auto est = vision::estimate_homography(batch);
  vision::write_homography(std::cout, est, batch.size());
  return 0;
}

int replay(const std::string& trace_path, const std::string& scenario_path) {
  const sim::Scenario s = sim::load_scenario(scenario_path);
  std::ifstream in(trace_path);
  if (!in) throw ValidationError("cannot open " + trace_path);
  const auto rep = sim::replay_check(in, s);
  if (rep.match) {
    std::printf("match\n");
    return 0;
  }
  std::printf("diverged at tick %zu\n  trace: %s\n  rerun: %s\n", *rep.first_divergent_tick, rep.expected.c_str(),
              rep.actual.c_str());
  return 1;
}

int serve(const std::string& scenario_path, unsigned short port, double time_scale) {
  live::Pacer pacer;
  pacer.time_scale = time_scale;
  live::Server server(sim::load_scenario(scenario_path), port, pacer, &std::cerr);
  std::fprintf(stderr, "serving on ws://127.0.0.1:%u (time scale %g); send {\"type\":\"cmd\",\"action\":\"start\"}\n",
               server.port(), time_scale);
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);
  server.start();
  int sig = 0;
  sigwait(&sigs, &sig);
  std::fprintf(stderr, "stopping\n");
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Casting manipulation: simulation, offline planning and live mode"};
  app.require_subcommand(1);

  std::string scenario, trace, config, out, csv;
  unsigned short port = 8765;
  double time_scale = 1.0;

  auto* sim_cmd = app.add_subcommand("simulate", "Run a scenario and print its outcome");
  sim_cmd->add_option("scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--trace", trace, "Write the per-tick trace CSV here ('-' for stdout)");

  auto* sweep_cmd = app.add_subcommand("sweep-angle", "3D minimum-time throwing-angle sweep");
  sweep_cmd->add_option("config", config, "Sweep config JSON")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", out, "CSV output (default stdout)");

  auto* table_cmd = app.add_subcommand("build-table", "Precompute the constant-force lookup table");
  table_cmd->add_option("config", config, "Table config JSON")->required()->check(CLI::ExistingFile);
  table_cmd->add_option("--out", out, "Table output (default stdout)");

  auto* cal_cmd = app.add_subcommand("calibrate", "Estimate the image-to-world homography");
  cal_cmd->add_option("correspondences", csv, "CSV of u,v,x,y rows")->required()->check(CLI::ExistingFile);

  auto* serve_cmd = app.add_subcommand("serve", "Live websocket mode for an external target");
  serve_cmd->add_option("scenario", scenario, "Scenario JSON with an external target")
      ->required()
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", port, "TCP port on 127.0.0.1");
  serve_cmd->add_option("--time-scale", time_scale, "Simulated seconds per wall second")
      ->check(CLI::PositiveNumber);

  auto* replay_cmd = app.add_subcommand("replay", "Check that a trace reproduces bit for bit");
  replay_cmd->add_option("trace", trace, "Trace CSV")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim_cmd) return simulate(scenario, trace);
    if (*sweep_cmd) return sweep(config, out);
    if (*table_cmd) return build_table(config, out);
    if (*cal_cmd) return calibrate(csv);
    if (*serve_cmd) return serve(scenario, port, time_scale);
    if (*replay_cmd) return replay(trace, scenario);
  } catch (const casting::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
