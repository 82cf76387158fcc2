#pragma once

// JSON forms of problems, signals and simulation traces.
//
//   problem: {"A": [[...]], "B": [[...]], "x0": [...], "T": 4.0,
//             "N": 400, "lambda": [...], "b": 8}    (N, lambda, b optional)
//   signal:  {"T": 4.0, "channels": [{"init": -1, "switches": [[t, v], ...]}]}

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "handsoff/errors.hpp"
#include "handsoff/model.hpp"
#include "handsoff/netsim.hpp"
#include "handsoff/signal.hpp"
#include "handsoff/solver.hpp"

namespace handsoff {

using json = nlohmann::json;

struct ProblemFile {
  Matrix A;
  Matrix B;
  Vector x0;
  double T = 0.0;
  std::size_t N = 0;  // 0 = default
  Vector lambda;      // empty = all ones
  int b = 8;

  PlantModel plant() const { return PlantModel(A, B); }
  ControlProblem problem() const {
    return ControlProblem(plant(), x0, T, N, lambda);
  }
};

namespace detail {

inline const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw InvalidInput(std::string("missing field \"") + key + "\"");
  }
  return j.at(key);
}

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw InvalidInput(what + " must be a number");
  return j.get<double>();
}

inline Vector vector_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidInput(what + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  }
  return v;
}

inline Matrix matrix_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw InvalidInput(what + " must be a non-empty array of rows");
  }
  const std::size_t cols = j[0].size();
  Matrix M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw DimensionError(what + " has rows of different length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(j[r][c], what);
    }
  }
  return M;
}

inline int integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) throw InvalidInput(what + " must be an integer");
  return j.get<int>();
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace detail

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("malformed JSON: ") + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << data;
}

/// Parses and validates a problem document.
inline ProblemFile problem_from_json(const json& j) {
  ProblemFile p;
  p.A = detail::matrix_from(detail::field(j, "A"), "A");
  p.B = detail::matrix_from(detail::field(j, "B"), "B");
  p.x0 = detail::vector_from(detail::field(j, "x0"), "x0");
  p.T = detail::number(detail::field(j, "T"), "T");
  if (j.contains("N")) {
    const int N = detail::integer(j.at("N"), "N");
    if (N < 1) throw InvalidInput("N must be positive");
    p.N = static_cast<std::size_t>(N);
  }
  if (j.contains("lambda")) {
    p.lambda = detail::vector_from(j.at("lambda"), "lambda");
  }
  if (j.contains("b")) p.b = detail::integer(j.at("b"), "b");
  if (p.b < 1 || p.b > 32) throw InvalidInput("b must lie in 1..32");
  // Constructing the problem checks every dimension and value.
  p.problem();
  return p;
}

inline ProblemFile load_problem(const std::string& path) {
  return problem_from_json(parse_json(read_file(path)));
}

inline json signal_to_json(const SwitchingSignal& s) {
  json channels = json::array();
  for (const Channel& c : s.channels) {
    json sw = json::array();
    for (const Switch& e : c.switches) sw.push_back({e.time, e.value});
    channels.push_back({{"init", c.initial}, {"switches", sw}});
  }
  return {{"T", s.T}, {"channels", channels}};
}

inline SwitchingSignal signal_from_json(const json& j) {
  SwitchingSignal s;
  s.T = detail::number(detail::field(j, "T"), "T");
  const json& chans = detail::field(j, "channels");
  if (!chans.is_array()) throw InvalidInput("channels must be an array");
  for (const json& c : chans) {
    Channel ch;
    ch.initial = detail::integer(detail::field(c, "init"), "init");
    const json& sw = detail::field(c, "switches");
    if (!sw.is_array()) throw InvalidInput("switches must be an array");
    for (const json& e : sw) {
      if (!e.is_array() || e.size() != 2) {
        throw InvalidInput("each switch must be [time, value]");
      }
      ch.switches.push_back({detail::number(e[0], "switch time"),
                             detail::integer(e[1], "switch value")});
    }
    s.channels.push_back(std::move(ch));
  }
  s.validate();
  return s;
}

inline json trace_json(const SimTrace& trace) {
  json hs = json::array();
  for (const HorizonRecord& r : trace.horizons) {
    hs.push_back({{"index", r.index},
                  {"t0", r.t0},
                  {"state", detail::to_json(r.state)},
                  {"status", to_string(r.status)},
                  {"switch_count", r.switch_count},
                  {"packet_bits", r.packet_bits},
                  {"dropped", r.dropped},
                  {"drop_reason", r.drop_reason},
                  {"fuel", r.fuel},
                  {"support", r.support},
                  {"applied", signal_to_json(r.applied)}});
  }
  return {{"horizons", hs},
          {"summary",
           {{"final_state", detail::to_json(trace.final_state)},
            {"final_error", trace.final_error},
            {"total_bits", trace.total_bits},
            {"total_fuel", trace.total_fuel},
            {"total_support", trace.total_support}}}};
}

}  // namespace handsoff
