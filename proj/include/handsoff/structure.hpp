#pragma once

// Grid controls to switching signals, structural checks on ternary signals
// and the switching-time bit budget.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "handsoff/errors.hpp"
#include "handsoff/model.hpp"
#include "handsoff/signal.hpp"

namespace handsoff {

inline constexpr double kDefaultEpsLevel = 0.25;

/// Where a switch between two runs of samples is placed.
///   left_edge: at the left edge of the first sample of the new run.
///   area: inside the transition cells so that the integral of the ternary
///         signal over them matches the integral of the samples.
enum class SwitchPlacement { left_edge, area };

struct Extraction {
  SwitchingSignal signal;
  double bang_bang_fraction = 1.0;
};

namespace detail {

inline int nearest_level(double v) {
  return static_cast<int>(std::clamp(std::round(v), -1.0, 1.0));
}

// Share of cell j spent at level a when the cell value is a mix of a and b.
inline double share_of(double sample, int a, int b) {
  return std::clamp((sample - b) / static_cast<double>(a - b), 0.0, 1.0);
}

}  // namespace detail

/// Quantizes each sample to the nearest of {-1, 0, +1}, merges equal runs and
/// emits one switch per run boundary. A sample further than eps_level from its
/// level still gets quantized but lowers bang_bang_fraction.
inline Extraction extract_switching(
    const Eigen::Ref<const Matrix>& u, double T,
    double eps_level = kDefaultEpsLevel,
    SwitchPlacement placement = SwitchPlacement::left_edge) {
  if (!(eps_level > 0.0 && eps_level < 0.5)) {
    throw InvalidArgument("eps_level must lie in (0, 0.5)");
  }
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw InvalidArgument("extract_switching: T must be positive and finite");
  }
  const Eigen::Index N = u.rows();
  const Eigen::Index m = u.cols();
  if (N < 1 || m < 1) throw DimensionError("extract_switching: empty grid");
  if (!u.allFinite()) throw InvalidInput("extract_switching: non-finite sample");

  const double dt = T / static_cast<double>(N);
  Extraction out;
  out.signal = SwitchingSignal::zero(T, static_cast<std::size_t>(m));
  std::size_t near = 0;

  for (Eigen::Index j = 0; j < m; ++j) {
    Channel& ch = out.signal.channels[static_cast<std::size_t>(j)];
    std::vector<int> q(static_cast<std::size_t>(N));
    for (Eigen::Index k = 0; k < N; ++k) {
      const int level = detail::nearest_level(u(k, j));
      q[static_cast<std::size_t>(k)] = level;
      if (std::abs(u(k, j) - level) <= eps_level) ++near;
    }
    ch.initial = q[0];
    std::vector<Eigen::Index> edges;
    for (Eigen::Index k = 1; k < N; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (q[uk] != q[uk - 1]) {
        edges.push_back(k);
        ch.switches.push_back({static_cast<double>(k) * dt, q[uk]});
      }
    }
    if (placement != SwitchPlacement::area) continue;

    int prev_value = ch.initial;
    for (std::size_t i = 0; i < ch.switches.size(); ++i) {
      const Eigen::Index k = edges[i];
      const int a = prev_value;
      const int b = ch.switches[i].value;
      prev_value = b;
      const double before = detail::share_of(u(k - 1, j), a, b);
      const double after = detail::share_of(u(k, j), a, b);
      if (before == 1.0 && after == 0.0) continue;  // clean edge
      const double t = static_cast<double>(k - 1) * dt + dt * (before + after);
      const double floor = i == 0 ? 0.0 : ch.switches[i - 1].time;
      if (t > floor && t < T) {
        ch.switches[i].time = t;
      } else if (ch.switches[i].time <= floor) {
        // Both neighbours fall back to their grid edges, which are ordered.
        ch.switches[i - 1].time = static_cast<double>(edges[i - 1]) * dt;
      }
    }
  }
  out.bang_bang_fraction =
      static_cast<double>(near) / static_cast<double>(N * m);
  return out;
}

struct StructureReport {
  std::vector<std::size_t> switch_count;  // per channel
  std::size_t total_switches = 0;
  double bound = 0.0;
  bool bound_applicable = false;
  std::size_t sign_flip_violations = 0;
  double bang_bang_fraction = 1.0;

  bool within_bound() const {
    return static_cast<double>(total_switches) <= std::ceil(bound);
  }
};

/// Switch count against 2nm(1 + T omega / pi). Only interior switches count;
/// a nonzero value at t = 0 is not a discontinuity here. The bound is always
/// reported but only applies to controllable plants with nonsingular A.
inline StructureReport verify_structure(const SwitchingSignal& signal,
                                        const PlantModel& plant, double T,
                                        double bang_bang_fraction = 1.0) {
  if (static_cast<Eigen::Index>(signal.m()) != plant.m()) {
    throw DimensionError("signal channel count does not match the plant");
  }
  const SpectralInfo spectrum = spectral_info(plant.A());
  StructureReport r;
  const auto n = static_cast<double>(plant.n());
  const auto m = static_cast<double>(plant.m());
  r.bound = 2.0 * n * m * (1.0 + T * spectrum.omega / std::numbers::pi);
  r.bound_applicable = spectrum.a_nonsingular && is_controllable(plant).controllable;
  r.bang_bang_fraction = bang_bang_fraction;
  for (const Channel& c : signal.channels) {
    r.switch_count.push_back(c.switches.size());
    r.total_switches += c.switches.size();
    int prev = c.initial;
    for (const Switch& s : c.switches) {
      if (prev * s.value == -1) ++r.sign_flip_violations;
      prev = s.value;
    }
  }
  return r;
}

struct BitBudget {
  double total_bits = 0.0;
  double bitrate_bps = 0.0;
};

/// total = 1 + 2nmb(1 + T omega / pi) bits per horizon,
/// rate  = 1/T + 2nmb(1/T + omega / pi) bits per second.
inline BitBudget theoretical_bits(double n, double m, double b, double T,
                                  double omega) {
  if (!(n > 0.0 && m > 0.0 && b > 0.0 && T > 0.0 && omega >= 0.0)) {
    throw InvalidArgument(
        "theoretical_bits: n, m, b, T must be positive and omega >= 0");
  }
  const double k = 2.0 * n * m * b;
  return {1.0 + k * (1.0 + T * omega / std::numbers::pi),
          1.0 / T + k * (1.0 / T + omega / std::numbers::pi)};
}

}  // namespace handsoff
