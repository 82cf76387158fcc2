#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "handsoff/errors.hpp"
#include "handsoff/model.hpp"

namespace handsoff {

struct Switch {
  double time = 0.0;
  int value = 0;

  friend bool operator==(const Switch&, const Switch&) = default;
};

struct Channel {
  int initial = 0;
  std::vector<Switch> switches;

  friend bool operator==(const Channel&, const Channel&) = default;

  /// Value in effect at time t (right-continuous).
  int value_at(double t) const {
    int v = initial;
    for (const Switch& s : switches) {
      if (s.time > t) break;
      v = s.value;
    }
    return v;
  }
};

/// Per-channel piecewise-constant ternary signal on [0, T].
struct SwitchingSignal {
  double T = 0.0;
  std::vector<Channel> channels;

  friend bool operator==(const SwitchingSignal&,
                         const SwitchingSignal&) = default;

  std::size_t m() const noexcept { return channels.size(); }

  std::size_t switch_count() const noexcept {
    std::size_t total = 0;
    for (const Channel& c : channels) total += c.switches.size();
    return total;
  }

  static SwitchingSignal zero(double T, std::size_t m) {
    return {T, std::vector<Channel>(m)};
  }

  /// Throws InvalidInput unless values are ternary, adjacent values differ and
  /// switch times are strictly increasing inside (0, T).
  void validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) {
      throw InvalidInput("signal horizon T must be positive and finite");
    }
    if (channels.empty()) throw InvalidInput("signal has no channels");
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const Channel& c = channels[i];
      const std::string where = "channel " + std::to_string(i) + ": ";
      if (c.initial < -1 || c.initial > 1) {
        throw InvalidInput(where + "initial value not in {-1,0,1}");
      }
      int prev = c.initial;
      double prev_t = 0.0;
      for (const Switch& s : c.switches) {
        if (s.value < -1 || s.value > 1) {
          throw InvalidInput(where + "switch value not in {-1,0,1}");
        }
        if (s.value == prev) {
          throw InvalidInput(where + "switch does not change the value");
        }
        if (!(s.time > prev_t) || !(s.time < T)) {
          throw InvalidInput(where +
                             "switch times must increase strictly in (0,T)");
        }
        prev = s.value;
        prev_t = s.time;
      }
    }
  }

  /// Samples the signal at the left edge of each of N uniform intervals.
  Eigen::MatrixXd sample(std::size_t N) const {
    Eigen::MatrixXd u(static_cast<Eigen::Index>(N),
                      static_cast<Eigen::Index>(m()));
    const double dt = T / static_cast<double>(N);
    for (std::size_t j = 0; j < m(); ++j) {
      for (std::size_t k = 0; k < N; ++k) {
        u(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
            channels[j].value_at(static_cast<double>(k) * dt);
      }
    }
    return u;
  }

  /// Ordered breakpoints of all channels, including 0 and T.
  std::vector<double> breakpoints() const {
    std::vector<double> pts{0.0};
    for (const Channel& c : channels) {
      for (const Switch& s : c.switches) pts.push_back(s.time);
    }
    pts.push_back(T);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
  }

  Eigen::VectorXd value_at(double t) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(m()));
    for (std::size_t j = 0; j < m(); ++j) {
      u(static_cast<Eigen::Index>(j)) = channels[j].value_at(t);
    }
    return u;
  }
};

/// Exact terminal state after applying the signal from x0 over [0, T].
inline Vector propagate_signal(const PlantModel& plant,
                               const Eigen::Ref<const Vector>& x0,
                               const SwitchingSignal& signal) {
  if (static_cast<Eigen::Index>(signal.m()) != plant.m()) {
    throw DimensionError("signal channel count does not match the plant");
  }
  Vector x = x0;
  const std::vector<double> pts = signal.breakpoints();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    x = propagate_segment(plant, x, signal.value_at(pts[i]), pts[i + 1] - pts[i]);
  }
  return x;
}

}  // namespace handsoff
