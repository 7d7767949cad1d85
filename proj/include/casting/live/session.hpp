#pragma once

// Live mode without the network: the client protocol, state frames and the
// paced stepper that owns the simulator. The stepper talks to the outside
// only through two queues.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <variant>

#include <json.hpp>

#include "casting/error.hpp"
#include "casting/sim/simulator.hpp"

namespace casting::live {

/// Unbounded multi-producer queue; close() wakes every waiter.
template <class T>
class Channel {
 public:
  void push(T v) {
    {
      std::lock_guard lk(m_);
      if (closed_) return;
      q_.push_back(std::move(v));
    }
    cv_.notify_one();
  }

  std::optional<T> try_pop() {
    std::lock_guard lk(m_);
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

  /// Waits up to `timeout`; empty on timeout or once closed and drained.
  template <class Rep, class Period>
  std::optional<T> pop_for(std::chrono::duration<Rep, Period> timeout) {
    std::unique_lock lk(m_);
    cv_.wait_for(lk, timeout, [&] { return closed_ || !q_.empty(); });
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

  void close() {
    {
      std::lock_guard lk(m_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<T> q_;
  bool closed_ = false;
};

struct TargetMessage {
  Vector2d p;
};

struct CommandMessage {
  enum class Action { start, reset } action;
};

/// Posted by the connection layer when a client goes away.
struct Disconnected {};

using ClientMessage = std::variant<TargetMessage, CommandMessage, Disconnected>;

/// Parses one client text frame. Unknown fields are ignored; an unknown type
/// or a missing/ill-typed field throws ValidationError.
inline ClientMessage parse_client_message(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("message is not valid JSON");
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw ValidationError("message needs a string 'type'");
  const auto type = j["type"].get<std::string>();
  if (type == "target") {
    if (!j.contains("x") || !j.contains("y") || !j["x"].is_number() || !j["y"].is_number())
      throw ValidationError("target message needs numeric x and y");
    const Vector2d p{j["x"].get<double>(), j["y"].get<double>()};
    if (!p.allFinite()) throw ValidationError("target position must be finite");
    return TargetMessage{p};
  }
  if (type == "cmd") {
    const auto action = j.value("action", std::string());
    if (action == "start") return CommandMessage{CommandMessage::Action::start};
    if (action == "reset") return CommandMessage{CommandMessage::Action::reset};
    throw ValidationError("unknown cmd action '" + action + "'");
  }
  throw ValidationError("unknown message type '" + type + "'");
}

inline std::string error_frame(std::string_view why) {
  return nlohmann::json{{"type", "error"}, {"message", why}}.dump();
}

inline nlohmann::json state_frame(const sim::Simulator& sim, bool running) {
  const JointState a = sim.arm();
  const Vector2d ee = sim.end_effector();
  const Vector2d tg = sim.target_position();
  nlohmann::json schedule = nlohmann::json::array();
  if (sim.schedule())
    for (const auto& s : sim.schedule()->segments()) schedule.push_back({s.t_start, s.u});
  nlohmann::json j = {{"type", "state"},
                      {"t", sim.time()},
                      {"arm", {a.q[0], a.q[1], a.q[2]}},
                      {"ee", {ee.x(), ee.y()}},
                      {"target", {tg.x(), tg.y()}},
                      {"tether_taut", sim.tether_taut()},
                      {"phase", sim::phase_name(sim.phase())},
                      {"schedule", schedule},
                      {"running", running}};
  if (sim.impulse() && sim.impulse()->t_brake()) j["t_brake"] = *sim.impulse()->t_brake();
  if (sim.done()) j["result"] = sim::result_name(sim.outcome().result);
  return j;
}

/// Owns the simulator. Only the stepper thread calls drain/advance/frame;
/// other threads reach it through inbound() and outbound().
class LiveSession {
 public:
  explicit LiveSession(sim::Scenario s, std::ostream* log = nullptr) : scenario_(std::move(s)), log_(log) {
    if (scenario_.target.kind != sim::TargetKind::external)
      throw ValidationError("live mode needs an external target");
    sim_.emplace(scenario_);
  }

  Channel<ClientMessage>& inbound() { return inbound_; }
  Channel<std::string>& outbound() { return outbound_; }

  const sim::Simulator& simulator() const { return *sim_; }
  bool running() const { return running_; }
  std::optional<Vector2d> last_commanded() const { return commanded_; }

  /// Applies every queued client message; called at tick boundaries.
  void drain() {
    while (auto m = inbound_.try_pop()) apply(*m);
  }

  void apply(const ClientMessage& m) {
    if (const auto* t = std::get_if<TargetMessage>(&m)) {
      sim_->set_external_target(t->p);
      commanded_ = t->p;
      return;
    }
    if (std::holds_alternative<Disconnected>(m)) {
      if (commanded_)
        log("client disconnected; target frozen at (" + std::to_string(commanded_->x()) + ", " +
            std::to_string(commanded_->y()) + ")");
      else
        log("client disconnected");
      return;
    }
    switch (std::get<CommandMessage>(m).action) {
      case CommandMessage::Action::start:
        running_ = true;
        break;
      case CommandMessage::Action::reset:
        sim_.emplace(scenario_);
        running_ = false;
        reported_done_ = false;
        if (commanded_) sim_->set_external_target(*commanded_);
        log("reset");
        break;
    }
  }

  /// Steps up to `ticks` control ticks while running; returns ticks taken.
  long advance(long ticks) {
    long n = 0;
    for (; n < ticks && running_ && !sim_->done(); ++n) sim_->step();
    if (running_ && sim_->done() && !reported_done_) {
      reported_done_ = true;
      log(std::string("finished: ") + sim::result_name(sim_->outcome().result));
    }
    return n;
  }

  std::string frame() const { return state_frame(*sim_, running_).dump(); }
  void publish() { outbound_.push(frame()); }

 private:
  void log(const std::string& line) {
    if (log_) *log_ << line << std::endl;
  }

  sim::Scenario scenario_;
  std::ostream* log_;
  std::optional<sim::Simulator> sim_;
  Channel<ClientMessage> inbound_;
  Channel<std::string> outbound_;
  std::optional<Vector2d> commanded_;
  bool running_ = false;
  bool reported_done_ = false;
};

/// Wall-clock pacing: simulated time advances `time_scale` times faster than
/// real time and a frame is published every `1 / frame_hz` wall seconds.
struct Pacer {
  double time_scale = 1.0;
  double frame_hz = 60.0;

  template <class StopFn>
  void run(LiveSession& s, StopFn should_stop) const {
    using clock = std::chrono::steady_clock;
    const double dt = s.simulator().scenario().timing.dt_control;
    const auto period = std::chrono::duration<double>(1.0 / frame_hz);
    auto next = clock::now();
    double owed = 0.0;
    while (!should_stop()) {
      s.drain();
      if (s.running()) {
        owed += period.count() * time_scale / dt;
        const long ticks = static_cast<long>(owed);
        owed -= static_cast<double>(ticks);
        s.advance(ticks);
      } else {
        owed = 0.0;
      }
      s.publish();
      next += std::chrono::duration_cast<clock::duration>(period);
      std::this_thread::sleep_until(next);
    }
  }
};

}  // namespace casting::live
