#pragma once

// Networked closed loop: every T seconds the controller solves the fuel-optimal
// problem from the measured state, encodes the switching signal and sends it
// through a lossy, bit-limited channel. The plant applies the decoded signal,
// or zero when the packet is lost.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "handsoff/codec.hpp"
#include "handsoff/errors.hpp"
#include "handsoff/model.hpp"
#include "handsoff/signal.hpp"
#include "handsoff/solver.hpp"
#include "handsoff/structure.hpp"

namespace handsoff {

/// SplitMix64 (Steele, Lea, Flood 2014). Draw k of a stream is a pure function
/// of (seed, k).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double next_uniform() { return to_unit(next_u64()); }

  static double draw(std::uint64_t seed, std::uint64_t k) {
    return to_unit(mix(seed + (k + 1) * kGamma));
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static double to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

  std::uint64_t state_;
};

inline std::vector<double> rng_stream(std::uint64_t seed, std::size_t count) {
  SplitMix64 g(seed);
  std::vector<double> out(count);
  for (double& v : out) v = g.next_uniform();
  return out;
}

inline constexpr std::uint64_t kDefaultSeed = 20140604;

struct ChannelModel {
  std::size_t bit_budget = 0;  // 0 = unlimited
  double loss_prob = 0.0;
  std::uint64_t seed = kDefaultSeed;

  void validate() const {
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) {
      throw InvalidArgument("loss_prob must lie in [0, 1]");
    }
  }
};

struct SimConfig {
  std::size_t horizons = 1;
  double T = 1.0;
  int b = 8;
  std::size_t N = 0;  // grid per horizon, 0 = default_grid_size
  Vector lambda;      // empty = all ones
  AdmmSettings settings{};
  double eps_level = kDefaultEpsLevel;
  SwitchPlacement placement = SwitchPlacement::left_edge;
  std::size_t samples_per_horizon = 200;
  double divergence_norm = 1e12;

  void validate() const {
    if (horizons < 1) throw InvalidArgument("need at least one horizon");
    if (!(T > 0.0) || !std::isfinite(T)) {
      throw InvalidArgument("horizon length T must be positive and finite");
    }
    if (b < 1 || b > 32) throw InvalidArgument("b must lie in 1..32");
    if (!(eps_level > 0.0 && eps_level < 0.5)) {
      throw InvalidArgument("eps_level must lie in (0, 0.5)");
    }
    if (samples_per_horizon < 1) {
      throw InvalidArgument("need at least one sample per horizon");
    }
    settings.validate();
  }
};

struct HorizonRecord {
  std::size_t index = 0;
  double t0 = 0.0;
  Vector state;  // at t0
  SolveStatus status = SolveStatus::optimal;
  std::size_t switch_count = 0;
  std::size_t packet_bits = 0;
  bool dropped = false;
  std::string drop_reason;  // "", "loss", "budget", "codec", "solve"
  SwitchingSignal applied;
  double fuel = 0.0;
  double support = 0.0;
};

struct SimTrace {
  std::vector<HorizonRecord> horizons;
  std::vector<double> t;
  std::vector<Vector> x;
  std::vector<Vector> u;
  Vector final_state;
  double final_error = 0.0;
  std::size_t total_bits = 0;
  double total_fuel = 0.0;
  double total_support = 0.0;
};

namespace detail {

// Integral of |u| and measure of {u != 0}, summed over channels.
inline void signal_measures(const SwitchingSignal& s, double& fuel,
                            double& support) {
  fuel = 0.0;
  support = 0.0;
  for (const Channel& c : s.channels) {
    double prev_t = 0.0;
    int v = c.initial;
    for (const Switch& sw : c.switches) {
      fuel += std::abs(v) * (sw.time - prev_t);
      support += (v != 0 ? 1.0 : 0.0) * (sw.time - prev_t);
      prev_t = sw.time;
      v = sw.value;
    }
    fuel += std::abs(v) * (s.T - prev_t);
    support += (v != 0 ? 1.0 : 0.0) * (s.T - prev_t);
  }
}

}  // namespace detail

/// Runs `config.horizons` transmissions starting from x0.
inline SimTrace run_closed_loop(const PlantModel& plant, const Vector& x0,
                                const SimConfig& config,
                                const ChannelModel& channel) {
  config.validate();
  channel.validate();
  if (x0.size() != plant.n()) throw DimensionError("x0 size mismatch");
  if (!x0.allFinite()) throw InvalidInput("x0 must be finite");

  const Eigen::Index m = plant.m();
  SimTrace trace;
  Vector x = x0;
  const double T = config.T;
  const std::size_t S = config.samples_per_horizon;

  for (std::size_t k = 0; k < config.horizons; ++k) {
    HorizonRecord rec;
    rec.index = k;
    rec.t0 = static_cast<double>(k) * T;
    rec.state = x;
    const bool lost = SplitMix64::draw(channel.seed, k) < channel.loss_prob;

    std::optional<SwitchingSignal> received;
    try {
      const ControlProblem problem(plant, x, T, config.N, config.lambda);
      const SolveResult sol =
          solve_l1(build_reachability(problem), config.settings);
      rec.status = sol.status;
      if (sol.status == SolveStatus::optimal) {
        const Extraction ex =
            extract_switching(sol.u, T, config.eps_level, config.placement);
        rec.switch_count = ex.signal.switch_count();
        const EncodedControl packet = encode(ex.signal, config.b);
        rec.packet_bits = bit_count(packet).total();
        received = decode(packet);
      } else {
        rec.drop_reason = "solve";
      }
    } catch (const DegenerateProgram&) {
      rec.status = SolveStatus::infeasible;
      rec.drop_reason = "solve";
    } catch (const CapacityError&) {
      rec.drop_reason = "codec";
    } catch (const StructureViolation&) {
      rec.drop_reason = "codec";
    }

    if (received && channel.bit_budget > 0 &&
        rec.packet_bits > channel.bit_budget) {
      rec.drop_reason = "budget";
      received.reset();
    }
    // A lost packet was still sent and its bits count.
    if (received) trace.total_bits += rec.packet_bits;
    if (received && lost) {
      rec.drop_reason = "loss";
      received.reset();
    }
    rec.dropped = !received.has_value();
    rec.applied = received ? *received
                           : SwitchingSignal::zero(T, static_cast<std::size_t>(m));
    detail::signal_measures(rec.applied, rec.fuel, rec.support);
    trace.total_fuel += rec.fuel;
    trace.total_support += rec.support;

    // Exact propagation through the breakpoints and the dense sample times.
    std::vector<double> pts = rec.applied.breakpoints();
    for (std::size_t i = 1; i < S; ++i) {
      pts.push_back(T * static_cast<double>(i) / static_cast<double>(S));
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::size_t next_sample = 0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double sample_t =
          T * static_cast<double>(next_sample) / static_cast<double>(S);
      const Vector u = rec.applied.value_at(pts[i]);
      if (next_sample < S && pts[i] == sample_t) {
        trace.t.push_back(rec.t0 + pts[i]);
        trace.x.push_back(x);
        trace.u.push_back(u);
        ++next_sample;
      }
      x = propagate_segment(plant, x, u, pts[i + 1] - pts[i]);
    }
    const double norm = x.norm();
    if (!(norm <= config.divergence_norm)) throw DivergenceError(k, norm);
    trace.horizons.push_back(std::move(rec));
  }

  trace.t.push_back(static_cast<double>(config.horizons) * T);
  trace.x.push_back(x);
  trace.u.push_back(Vector::Zero(m));
  trace.final_state = x;
  trace.final_error = x.norm();
  return trace;
}

struct SweepRow {
  int b = 0;
  double final_error = 0.0;
  std::size_t total_bits = 0;
};

/// One lossless run per entry of b_list, in order.
inline std::vector<SweepRow> sweep_bits(const PlantModel& plant,
                                        const Vector& x0,
                                        const SimConfig& config,
                                        const std::vector<int>& b_list) {
  std::vector<SweepRow> rows;
  for (int b : b_list) {
    SimConfig c = config;
    c.b = b;
    const SimTrace trace = run_closed_loop(plant, x0, c, ChannelModel{});
    rows.push_back({b, trace.final_error, trace.total_bits});
  }
  return rows;
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

/// Dense samples: t, x1..xn, u1..um.
inline std::string trace_csv(const SimTrace& trace) {
  std::ostringstream os;
  const Eigen::Index n = trace.x.empty() ? 0 : trace.x.front().size();
  const Eigen::Index m = trace.u.empty() ? 0 : trace.u.front().size();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i + 1;
  for (Eigen::Index j = 0; j < m; ++j) os << ",u" << j + 1;
  os << "\n";
  for (std::size_t s = 0; s < trace.t.size(); ++s) {
    os << detail::fmt(trace.t[s]);
    for (Eigen::Index i = 0; i < n; ++i) os << "," << detail::fmt(trace.x[s](i));
    for (Eigen::Index j = 0; j < m; ++j) os << "," << detail::fmt(trace.u[s](j));
    os << "\n";
  }
  return os.str();
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "b,final_error,total_bits\n";
  for (const SweepRow& r : rows) {
    os << r.b << "," << detail::fmt(r.final_error) << "," << r.total_bits << "\n";
  }
  return os.str();
}

}  // namespace handsoff
