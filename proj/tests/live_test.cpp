#include <chrono>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "casting/live/server.hpp"

using namespace casting;
using namespace casting::live;
using nlohmann::json;

namespace {

const std::filesystem::path kData = CASTING_TEST_DATA_DIR;

sim::Scenario near_throw(sim::TargetKind kind) {
  sim::Scenario s = sim::load_scenario(kData / "regression-piecewise.json");
  s.target.kind = kind;
  return s;
}

std::string trace_text(const std::vector<sim::TraceRecord>& rows) {
  std::ostringstream os;
  sim::write_trace_csv(os, rows);
  return os.str();
}

struct Step {
  double after;  // takes effect for ticks whose end lies past this time
  Vector2d p;
};

/// Drives a session the way a client would, one protocol message per step,
/// each delivered at the tick boundary where the offline track switches.
std::vector<sim::TraceRecord> drive(const sim::Scenario& s, const std::vector<Step>& steps) {
  LiveSession session(s);
  session.inbound().push(parse_client_message(R"({"type":"cmd","action":"start"})"));
  std::size_t next = 0;
  const double dt = s.timing.dt_control;
  while (!session.simulator().done()) {
    const double t = session.simulator().time();
    while (next < steps.size() && t + dt > steps[next].after) {
      json m = {{"type", "target"}, {"x", steps[next].p.x()}, {"y", steps[next].p.y()}, {"source", "drag"}};
      session.inbound().push(parse_client_message(m.dump()));
      ++next;
    }
    session.drain();
    session.advance(1);
  }
  return session.simulator().trace();
}

/// The same staircase as an offline waypoint track.
sim::Scenario staircase(sim::Scenario s, const std::vector<Step>& steps) {
  s.target.kind = sim::TargetKind::waypoints;
  s.target.clock = sim::TargetClock::sim;
  Vector2d last = s.target.position;
  for (const auto& st : steps) {
    s.target.waypoints.push_back({st.after, last});
    s.target.waypoints.push_back({st.after + 1e-5, st.p});
    last = st.p;
  }
  return s;
}

const std::vector<Step> kDrag = {{0.20025, {1.75, 0.0}}, {0.45025, {1.70, 0.02}}, {0.60025, {1.62, 0.0}}};

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
  }
  void send(const std::string& text) { ws_.write(net::buffer(text)); }
  std::string read_text() {
    beast::flat_buffer b;
    ws_.read(b);
    return beast::buffers_to_string(b.data());
  }
  json read() { return json::parse(read_text()); }
  void close() { ws_.close(websocket::close_code::normal); }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

}  // namespace

TEST(Protocol, ClientMessagesParse) {
  const auto t = parse_client_message(R"({"type":"target","x":1.5,"y":0.25,"pointer":7})");
  ASSERT_TRUE(std::holds_alternative<TargetMessage>(t));
  EXPECT_EQ(std::get<TargetMessage>(t).p, Vector2d(1.5, 0.25));
  const auto c = parse_client_message(R"({"type":"cmd","action":"reset"})");
  ASSERT_TRUE(std::holds_alternative<CommandMessage>(c));
  EXPECT_EQ(std::get<CommandMessage>(c).action, CommandMessage::Action::reset);

  for (const char* bad : {R"({"type":"teleport"})", R"({"type":"target","x":1})", R"({"type":"target","x":"1","y":0})",
                          R"({"type":"cmd","action":"pause"})", R"({"x":1,"y":2})", "[1,2]", "{nope"}) {
    EXPECT_THROW(parse_client_message(bad), ValidationError) << bad;
  }
  const json e = json::parse(error_frame("bad"));
  EXPECT_EQ(e["type"], "error");
}

TEST(Session, RequiresAnExternalTarget) {
  EXPECT_THROW(LiveSession(near_throw(sim::TargetKind::fixed)), ValidationError);
}

TEST(Session, StateFrameCarriesTheProtocolFields) {
  LiveSession session(near_throw(sim::TargetKind::external));
  const json f = json::parse(session.frame());
  for (const char* k : {"type", "t", "arm", "ee", "target", "tether_taut", "phase", "schedule"})
    EXPECT_TRUE(f.contains(k)) << k;
  EXPECT_EQ(f["type"], "state");
  EXPECT_EQ(f["arm"].size(), 3u);
  EXPECT_EQ(f["phase"], "startup");
  EXPECT_EQ(f["target"][0].get<double>(), 1.81);
  EXPECT_EQ(session.advance(10), 0);  // idle until started
}

TEST(Session, NoInputBehavesAsTheStaticScenario) {
  const auto live = drive(near_throw(sim::TargetKind::external), {});
  EXPECT_EQ(trace_text(live), trace_text(sim::run_scenario(near_throw(sim::TargetKind::fixed)).trace));
}

TEST(Session, ScriptedDragReproducesTheOfflineWaypointRun) {
  const sim::Scenario ext = near_throw(sim::TargetKind::external);
  const auto live = drive(ext, kDrag);
  const auto offline = sim::run_scenario(staircase(ext, kDrag));
  EXPECT_EQ(trace_text(live), trace_text(offline.trace));
  EXPECT_GT(offline.outcome.replans, 2);
}

TEST(Session, NoiselessObservationsSampleTheDraggedPath) {
  sim::Scenario s = near_throw(sim::TargetKind::external);
  s.vision.pixel_sigma = 0.0;
  s.vision.quantize = false;
  s.vision.exact_calibration = true;
  const auto live = drive(s, kDrag);
  const sim::Scenario path = staircase(s, kDrag);
  sim::TargetTrack track(path.target);
  const double dt = s.timing.dt_control;
  int samples = 0;
  for (const auto& row : live) {
    if (row.obs && row.obs->t == row.t) {
      EXPECT_NEAR((row.obs->p - track.position()).norm(), 0.0, 1e-12) << row.t;
      ++samples;
    }
    track.advance(row.t + dt, dt, std::nullopt);
  }
  EXPECT_GT(samples, 10);
}

TEST(Session, ResetRestartsTheRunAndKeepsTheTarget) {
  LiveSession session(near_throw(sim::TargetKind::external));
  session.apply(TargetMessage{{1.7, 0.0}});
  session.apply(CommandMessage{CommandMessage::Action::start});
  session.advance(400);
  EXPECT_GT(session.simulator().time(), 0.0);
  session.apply(CommandMessage{CommandMessage::Action::reset});
  EXPECT_EQ(session.simulator().time(), 0.0);
  EXPECT_FALSE(session.running());
  EXPECT_EQ(session.last_commanded(), Vector2d(1.7, 0.0));
}

TEST(Server, ViewersReceiveIdenticalFramesAtThirtyHertzOrMore) {
  Server server(near_throw(sim::TargetKind::external), 0);
  server.start();
  Client a(server.port()), b(server.port());
  a.send(R"({"type":"cmd","action":"start"})");

  std::map<double, std::string> seen_a, seen_b;
  const auto t0 = std::chrono::steady_clock::now();
  int frames_a = 0;
  while (std::chrono::steady_clock::now() - t0 < std::chrono::seconds(1)) {
    const std::string fa = a.read_text(), fb = b.read_text();
    ++frames_a;
    const json ja = json::parse(fa), jb = json::parse(fb);
    if (ja["running"].get<bool>()) seen_a[ja["t"].get<double>()] = fa;
    if (jb["running"].get<bool>()) seen_b[jb["t"].get<double>()] = fb;
  }
  EXPECT_GE(frames_a, 30);
  int common = 0;
  for (const auto& [t, f] : seen_b) {
    const auto it = seen_a.find(t);
    if (it == seen_a.end()) continue;
    EXPECT_EQ(it->second, f);
    ++common;
  }
  EXPECT_GE(common, 20);
  a.close();
  b.close();
  server.stop();
}

TEST(Server, BadMessagesGetAnErrorFrameAndUnknownFieldsAreIgnored) {
  Server server(near_throw(sim::TargetKind::external), 0);
  server.start();
  Client c(server.port());
  c.send(R"({"type":"teleport","x":1})");
  bool got_error = false;
  for (int i = 0; i < 200 && !got_error; ++i) got_error = c.read()["type"] == "error";
  EXPECT_TRUE(got_error);

  c.send(R"({"type":"target","x":1.7,"y":0.0,"colour":"red"})");
  c.send(R"({"type":"cmd","action":"start"})");
  bool moved = false;
  for (int i = 0; i < 200 && !moved; ++i) {
    const json f = c.read();
    moved = f["type"] == "state" && f["target"][0].get<double>() < 1.81;
  }
  EXPECT_TRUE(moved);
  c.close();
  server.stop();
}

TEST(Server, DisconnectFreezesTheTarget) {
  std::ostringstream log;
  Server server(near_throw(sim::TargetKind::external), 0, Pacer{4.0, 60.0}, &log);
  server.start();
  Client viewer(server.port());
  {
    Client driver(server.port());
    driver.send(R"({"type":"target","x":1.7,"y":0.05})");
    driver.send(R"({"type":"cmd","action":"start"})");
    driver.close();
  }
  json last;
  const auto t0 = std::chrono::steady_clock::now();
  while (std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(800)) last = viewer.read();
  EXPECT_NEAR(last["target"][0].get<double>(), 1.7, 1e-12);
  EXPECT_NEAR(last["target"][1].get<double>(), 0.05, 1e-12);
  viewer.close();
  server.stop();
  EXPECT_NE(log.str().find("target frozen at (1.700000, 0.050000)"), std::string::npos) << log.str();
}
