#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "casting/error.hpp"
#include "casting/observation.hpp"

namespace casting::sim {

enum class Phase { startup = 0, thrown = 1, steering = 2, terminal = 3 };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::startup: return "startup";
    case Phase::thrown: return "thrown";
    case Phase::steering: return "steering";
    case Phase::terminal: return "terminal";
  }
  return "?";
}

inline Phase parse_phase(const std::string& s) {
  if (s == "startup") return Phase::startup;
  if (s == "thrown") return Phase::thrown;
  if (s == "steering") return Phase::steering;
  if (s == "terminal") return Phase::terminal;
  throw ValidationError("unknown phase '" + s + "'");
}

/// One control tick: the state at the start of the tick, the commands held
/// over it and the newest observation in effect.
struct TraceRecord {
  double t = 0.0;
  Phase phase = Phase::startup;
  double q[3] = {0, 0, 0};
  double qd[3] = {0, 0, 0};
  double xe = 0, ye = 0, xde = 0, yde = 0;
  bool taut = true;
  double tau1 = 0, f3 = 0, u_cmd = 0;
  std::optional<TargetObservation> obs;
  std::string event;  ///< ';'-separated event names, empty for none
};

inline constexpr const char* kTraceHeader =
    "t,phase,q1,q2,q3,qd1,qd2,qd3,xe,ye,xde,yde,taut,tau1,f3,u_cmd,obs_t,obs_x,obs_y,event";

inline std::string format_trace_row(const TraceRecord& r) {
  std::string out;
  out.reserve(400);
  char buf[32];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
    out += ',';
  };
  num(r.t);
  out += phase_name(r.phase);
  out += ',';
  for (double v : r.q) num(v);
  for (double v : r.qd) num(v);
  num(r.xe);
  num(r.ye);
  num(r.xde);
  num(r.yde);
  out += r.taut ? "1," : "0,";
  num(r.tau1);
  num(r.f3);
  num(r.u_cmd);
  if (r.obs) {
    num(r.obs->t);
    num(r.obs->p.x());
    num(r.obs->p.y());
  } else {
    out += ",,,";
  }
  out += r.event;
  return out;
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& rows) {
  os << kTraceHeader << '\n';
  for (const auto& r : rows) os << format_trace_row(r) << '\n';
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double to_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("bad number '" + s + "' on trace line " + std::to_string(line));
  }
}

}  // namespace detail

/// Raw trace: the data lines as written, plus the parsed records. Throws on a
/// malformed or truncated trace (one that does not end in the terminal phase).
struct TraceFile {
  std::vector<std::string> lines;
  std::vector<TraceRecord> rows;
};

inline TraceFile read_trace_csv(std::istream& is) {
  TraceFile tf;
  std::string line;
  if (!std::getline(is, line) || (line != kTraceHeader && line != std::string(kTraceHeader) + "\r"))
    throw ValidationError("trace header does not match the expected columns");
  std::size_t n = 1;
  bool complete_last_line = true;
  while (std::getline(is, line)) {
    ++n;
    complete_last_line = !is.eof();
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto f = detail::split_csv(line);
    if (f.size() != 20) throw ValidationError("trace line " + std::to_string(n) + " has " +
                                              std::to_string(f.size()) + " fields, expected 20");
    TraceRecord r;
    r.t = detail::to_double(f[0], n);
    r.phase = parse_phase(f[1]);
    for (int i = 0; i < 3; ++i) r.q[i] = detail::to_double(f[2 + i], n);
    for (int i = 0; i < 3; ++i) r.qd[i] = detail::to_double(f[5 + i], n);
    r.xe = detail::to_double(f[8], n);
    r.ye = detail::to_double(f[9], n);
    r.xde = detail::to_double(f[10], n);
    r.yde = detail::to_double(f[11], n);
    if (f[12] != "0" && f[12] != "1") throw ValidationError("bad taut flag on trace line " + std::to_string(n));
    r.taut = f[12] == "1";
    r.tau1 = detail::to_double(f[13], n);
    r.f3 = detail::to_double(f[14], n);
    r.u_cmd = detail::to_double(f[15], n);
    if (!f[16].empty()) r.obs = TargetObservation{detail::to_double(f[16], n), {detail::to_double(f[17], n),
                                                                                 detail::to_double(f[18], n)}};
    r.event = f[19];
    tf.lines.push_back(line);
    tf.rows.push_back(std::move(r));
  }
  if (tf.rows.empty()) throw ValidationError("trace has no rows");
  if (!complete_last_line || tf.rows.back().phase != Phase::terminal)
    throw ValidationError("trace is truncated: it does not end in the terminal phase");
  return tf;
}

}  // namespace casting::sim
