#pragma once

// Brute-force reference for single-input, low-order plants: exhaustive search
// over ternary piecewise-constant signals with a bounded number of switches on
// a uniform time grid, followed by Newton refinement of the switch times so
// the certificate hits the origin to tight tolerance.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "handsoff/errors.hpp"
#include "handsoff/model.hpp"
#include "handsoff/signal.hpp"

namespace handsoff {

struct OracleOptions {
  int K_max = 4;
  std::size_t grid = 200;
  /// Terminal-state tolerance of accepted certificates; <= 0 selects
  /// 1e-9 * (1 + |x0|).
  double tolerance = 0.0;
  /// How many of the best grid candidates are handed to refinement.
  std::size_t candidates = 16;
};

struct OracleResult {
  SwitchingSignal signal;
  double J1 = 0.0;
  double J0 = 0.0;
  bool feasible = false;
  Vector terminal_state;
  double tolerance = 0.0;
};

namespace detail {

inline constexpr int kMaxOracleSwitches = 4;

struct OracleCandidate {
  double J0 = 0.0;  // linearized estimate, in grid cells
  int k = 0;
  std::array<int, kMaxOracleSwitches + 1> values{};
  std::array<double, kMaxOracleSwitches> time{};  // in grid cells

  bool operator<(const OracleCandidate& o) const { return J0 < o.J0; }
};

inline void ternary_patterns(int k, std::vector<int>& cur,
                             std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == k + 1) {
    out.push_back(cur);
    return;
  }
  for (int v = -1; v <= 1; ++v) {
    if (!cur.empty() && cur.back() == v) continue;
    cur.push_back(v);
    ternary_patterns(k, cur, out);
    cur.pop_back();
  }
}

/// Grid search. The terminal state of a pattern with switch indices s_i is
///   h + v_k P[grid] + sum_i (v_{i-1} - v_i) P[s_i]
/// where P[j] is the exact response to a unit input held on [0, t_j] and
/// D[j] = dP/dt at t_j. A grid point near the target is kept only when a
/// linearized min-norm correction of the switch times reaches the target
/// while moving every switch by at most one cell.
class GridSearch {
 public:
  GridSearch(std::vector<Eigen::Vector2d> P, std::vector<Eigen::Vector2d> D,
             Eigen::Vector2d h, int grid, double cell, double cell_bound,
             std::size_t capacity)
      : P_(std::move(P)), D_(std::move(D)), h_(h), grid_(grid), cell_(cell),
        cell_bound_(cell_bound), capacity_(capacity) {
    build_bounds();
  }

  void run_pattern(const std::vector<int>& values) {
    const int k = static_cast<int>(values.size()) - 1;
    values_ = values;
    d_.assign(static_cast<std::size_t>(k), 0);
    double jump = 0.0;
    for (int i = 0; i < k; ++i) {
      d_[static_cast<std::size_t>(i)] = values[static_cast<std::size_t>(i)] -
                                        values[static_cast<std::size_t>(i) + 1];
      jump += std::abs(d_[static_cast<std::size_t>(i)]);
    }
    const double tol = 0.55 * jump * cell_bound_ + 1e-12;
    tol2_ = tol * tol;
    const Eigen::Vector2d base = h_ + values.back() * P_.back();
    idx_.assign(static_cast<std::size_t>(k), 0);
    if (k >= 2) build_pairs(d_[k - 2], d_[k - 1], tol);
    recurse(0, 0, base, 0.0);
  }

  std::vector<OracleCandidate> sorted() const {
    auto heap = heap_;
    std::vector<OracleCandidate> out;
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  // A candidate's corrected cost can undercut its grid cost by at most one
  // cell per switch.
  bool prune(double partial) const {
    return heap_.size() >= capacity_ &&
           partial - static_cast<double>(d_.size()) >= heap_.top().J0;
  }

  void offer(const Eigen::Vector2d& residual, double J0_grid) {
    const std::size_t k = d_.size();
    std::array<double, kMaxOracleSwitches> shift{};
    if (k > 0) {
      // J = [d_i D[s_i]] (2 x k); min-norm shift = -J^T (J J^T)^+ F, in cells.
      Eigen::Matrix<double, 2, kMaxOracleSwitches> J =
          Eigen::Matrix<double, 2, kMaxOracleSwitches>::Zero();
      double reach = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        J.col(static_cast<Eigen::Index>(i)) =
            d_[i] * D_[static_cast<std::size_t>(idx_[i])] * cell_;
        reach += J.col(static_cast<Eigen::Index>(i)).norm();
      }
      // |J step| <= sum |J_i| when every |step_i| <= 1.
      if (residual.norm() > reach + 0.05 * cell_bound_ + 1e-12) return;
      const Eigen::Matrix2d JJt = J * J.transpose();
      Eigen::Matrix<double, kMaxOracleSwitches, 1> step;
      const double det = JJt.determinant();
      if (std::abs(det) > 1e-24 * JJt.squaredNorm()) {
        step = -J.transpose() * JJt.inverse() * residual;
      } else {
        // Nearly rank one: pseudo-inverse of J is J^T / |J|_F^2.
        const double f2 = J.squaredNorm();
        if (f2 == 0.0) return;
        step = -J.transpose() * residual / f2;
      }
      if ((J * step + residual).norm() > 0.05 * cell_bound_ + 1e-12) return;
      if ((step.head(static_cast<Eigen::Index>(k)).array().abs() > 1.0).any()) {
        return;
      }
      for (std::size_t i = 0; i < k; ++i) {
        shift[i] = step(static_cast<Eigen::Index>(i));
      }
    } else if (residual.norm() > 1e-12) {
      return;
    }

    // Corrected switch positions must stay ordered inside (0, grid).
    std::array<double, kMaxOracleSwitches> time{};
    double prev = 0.0;
    double J0 = J0_grid;
    for (std::size_t i = 0; i < k; ++i) {
      time[i] = idx_[i] + shift[i];
      if (!(time[i] > prev)) return;
      prev = time[i];
      J0 += ((values_[i] != 0 ? 1.0 : 0.0) - (values_[i + 1] != 0 ? 1.0 : 0.0)) *
            shift[i];
    }
    if (!(prev < grid_)) return;
    if (heap_.size() >= capacity_ && J0 >= heap_.top().J0) return;

    OracleCandidate c;
    c.J0 = J0;
    c.k = static_cast<int>(k);
    for (std::size_t i = 0; i < values_.size(); ++i) c.values[i] = values_[i];
    c.time = time;
    heap_.push(c);
    if (heap_.size() > capacity_) heap_.pop();
  }

  // Squared distance from point q to the box [lo, hi].
  static double box_dist2(const Eigen::Vector2d& q, const Eigen::Vector2d& lo,
                          const Eigen::Vector2d& hi) {
    const Eigen::Vector2d gap =
        (lo - q).cwiseMax(q - hi).cwiseMax(Eigen::Vector2d::Zero());
    return gap.squaredNorm();
  }

  // Can sum_{i > level} d_i P[s_i] with all s_i > s bring partial near 0?
  bool reachable(std::size_t level, int s, const Eigen::Vector2d& partial) const {
    Eigen::Vector2d lo = partial;
    Eigen::Vector2d hi = partial;
    const auto from = static_cast<std::size_t>(s) + 1;
    for (std::size_t i = level + 1; i < d_.size(); ++i) {
      const Eigen::Vector2d a = d_[i] * suffix_lo_[from];
      const Eigen::Vector2d b = d_[i] * suffix_hi_[from];
      lo += a.cwiseMin(b);
      hi += a.cwiseMax(b);
    }
    return box_dist2(Eigen::Vector2d::Zero(), lo, hi) <= tol2_;
  }

  // level: which switch is being placed; prev: index of the previous switch.
  void recurse(std::size_t level, int prev, const Eigen::Vector2d& partial,
               double J0) {
    const std::size_t k = d_.size();
    if (k == 0) {
      if (partial.squaredNorm() <= tol2_) {
        offer(partial, values_[0] != 0 ? static_cast<double>(grid_) : 0.0);
      }
      return;
    }
    const bool seg_on = values_[level] != 0;
    const int first = level == 0 ? 1 : prev + 1;
    const int last = grid_ - static_cast<int>(k - level);
    const double d = d_[level];

    if (level + 2 == k) {
      query_pairs(prev, partial, J0);
      return;
    }
    if (level + 1 == k) {
      // Single switch: scan blocks of the P curve, skipping far blocks.
      const bool tail_on = values_[k] != 0;
      const Eigen::Vector2d target = -partial / d;
      const double tol2_scaled = tol2_ / (d * d);
      for (int s = first; s <= last;) {
        const auto blk = static_cast<std::size_t>(s) / kBlock;
        const int blk_end =
            std::min(last, static_cast<int>((blk + 1) * kBlock) - 1);
        if (box_dist2(target, block_lo_[blk], block_hi_[blk]) > tol2_scaled) {
          s = blk_end + 1;
          continue;
        }
        for (; s <= blk_end; ++s) {
          const double J = J0 + (seg_on ? static_cast<double>(s - prev) : 0.0);
          if (seg_on && prune(J)) return;
          const Eigen::Vector2d r = partial + d * P_[static_cast<std::size_t>(s)];
          if (r.squaredNorm() > tol2_) continue;
          idx_[level] = s;
          offer(r, J + (tail_on ? static_cast<double>(grid_ - s) : 0.0));
        }
      }
      return;
    }

    for (int s = first; s <= last; ++s) {
      const double J = J0 + (seg_on ? static_cast<double>(s - prev) : 0.0);
      if (prune(J)) break;
      const Eigen::Vector2d next = partial + d * P_[static_cast<std::size_t>(s)];
      if (!reachable(level, s, next)) continue;
      idx_[level] = s;
      recurse(level + 1, s, next, J);
    }
  }

  struct PairPoint {
    std::int64_t key;
    int a;
    int b;
    Eigen::Vector2d sum;
  };

  std::int64_t cell_key(const Eigen::Vector2d& q) const {
    const auto cx = static_cast<std::int64_t>(std::floor(q.x() / hash_cell_));
    const auto cy = static_cast<std::int64_t>(std::floor(q.y() / hash_cell_));
    return cx * 2654435761LL + cy;
  }

  // All sums da * P[a] + db * P[b] with 1 <= a < b <= grid - 1, bucketed on
  // a square lattice with spacing tol.
  void build_pairs(int da, int db, double tol) {
    hash_cell_ = tol;
    pairs_.clear();
    for (int a = 1; a < grid_; ++a) {
      for (int b = a + 1; b < grid_; ++b) {
        const Eigen::Vector2d q = da * P_[static_cast<std::size_t>(a)] +
                                  db * P_[static_cast<std::size_t>(b)];
        pairs_.push_back({cell_key(q), a, b, q});
      }
    }
    std::sort(pairs_.begin(), pairs_.end(),
              [](const PairPoint& l, const PairPoint& r) { return l.key < r.key; });
  }

  // Last two switches: look up sums near -partial.
  void query_pairs(int prev, const Eigen::Vector2d& partial, double J0) {
    const std::size_t k = d_.size();
    const bool on_a = values_[k - 2] != 0;
    const bool on_b = values_[k - 1] != 0;
    const bool on_tail = values_[k] != 0;
    const Eigen::Vector2d target = -partial;
    for (int ox = -1; ox <= 1; ++ox) {
      for (int oy = -1; oy <= 1; ++oy) {
        const Eigen::Vector2d probe =
            target + hash_cell_ * Eigen::Vector2d(ox, oy);
        const std::int64_t key = cell_key(probe);
        auto [lo, hi] = std::equal_range(
            pairs_.begin(), pairs_.end(), PairPoint{key, 0, 0, {}},
            [](const PairPoint& l, const PairPoint& r) { return l.key < r.key; });
        for (auto it = lo; it != hi; ++it) {
          if (it->a <= prev) continue;
          const Eigen::Vector2d r = partial + it->sum;
          if (r.squaredNorm() > tol2_) continue;
          double J = J0;
          if (on_a) J += it->a - prev;
          if (on_b) J += it->b - it->a;
          if (on_tail) J += grid_ - it->b;
          idx_[k - 2] = it->a;
          idx_[k - 1] = it->b;
          offer(r, J);
        }
      }
    }
  }

  void build_bounds() {
    const std::size_t n = P_.size();
    suffix_lo_.assign(n + 1, Eigen::Vector2d::Constant(
                                 std::numeric_limits<double>::infinity()));
    suffix_hi_.assign(n + 1, Eigen::Vector2d::Constant(
                                 -std::numeric_limits<double>::infinity()));
    // Switches live on indices 1 .. grid-1.
    for (std::size_t j = n - 1; j-- > 1;) {
      suffix_lo_[j] = suffix_lo_[j + 1].cwiseMin(P_[j]);
      suffix_hi_[j] = suffix_hi_[j + 1].cwiseMax(P_[j]);
    }
    const std::size_t blocks = n / kBlock + 1;
    block_lo_.assign(blocks, Eigen::Vector2d::Constant(
                                 std::numeric_limits<double>::infinity()));
    block_hi_.assign(blocks, Eigen::Vector2d::Constant(
                                 -std::numeric_limits<double>::infinity()));
    for (std::size_t j = 0; j < n; ++j) {
      block_lo_[j / kBlock] = block_lo_[j / kBlock].cwiseMin(P_[j]);
      block_hi_[j / kBlock] = block_hi_[j / kBlock].cwiseMax(P_[j]);
    }
  }

  static constexpr std::size_t kBlock = 8;
  std::vector<Eigen::Vector2d> suffix_lo_, suffix_hi_, block_lo_, block_hi_;

  std::vector<Eigen::Vector2d> P_;
  std::vector<Eigen::Vector2d> D_;
  Eigen::Vector2d h_;
  int grid_;
  double cell_;  // grid step, converts D to per-cell derivatives
  double cell_bound_;
  std::size_t capacity_;
  double tol2_ = 0.0;
  std::vector<int> values_;
  std::vector<int> d_;
  std::vector<int> idx_;
  std::priority_queue<OracleCandidate> heap_;
  double hash_cell_ = 1.0;
  std::vector<PairPoint> pairs_;
};

inline SwitchingSignal make_signal(double T, const std::vector<int>& values,
                                   const Vector& times) {
  SwitchingSignal sig = SwitchingSignal::zero(T, 1);
  sig.channels[0].initial = values[0];
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    sig.channels[0].switches.push_back(
        {times(i), values[static_cast<std::size_t>(i) + 1]});
  }
  return sig;
}

inline bool ordered_inside(const Vector& t, double T) {
  double prev = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(t(i) > prev)) return false;
    prev = t(i);
  }
  return prev < T;
}

/// Damped minimum-norm Newton on the switch times. Returns true when the
/// exact terminal state is within tol.
inline bool refine_switch_times(const PlantModel& plant, const Vector& x0,
                                double T, const std::vector<int>& values,
                                Vector& times, double tol) {
  const Eigen::Index k = times.size();
  const auto terminal = [&](const Vector& t) {
    return propagate_signal(plant, x0, make_signal(T, values, t));
  };
  Vector F = terminal(times);
  for (int it = 0; it < 60 && F.norm() > tol; ++it) {
    if (k == 0) return false;
    Matrix J(plant.n(), k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double d = values[static_cast<std::size_t>(i)] -
                       values[static_cast<std::size_t>(i) + 1];
      J.col(i) = d * expm(plant.A() * (T - times(i))) * plant.B().col(0);
    }
    const Vector step = J.completeOrthogonalDecomposition().solve(-F);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
      const Vector trial = times + alpha * step;
      if (!ordered_inside(trial, T)) continue;
      const Vector Ft = terminal(trial);
      if (Ft.norm() < F.norm()) {
        times = trial;
        F = Ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) return false;
  }
  return F.norm() <= tol;
}

}  // namespace detail

/// Minimum-support ternary control with at most K_max switches.
/// Restricted to m = 1, n <= 2, K_max <= 4, grid <= 200.
inline OracleResult oracle_bang_off_bang(const PlantModel& plant,
                                         const Vector& x0, double T,
                                         const OracleOptions& opt = {}) {
  if (plant.m() != 1 || plant.n() > 2 || opt.K_max < 0 ||
      opt.K_max > detail::kMaxOracleSwitches || opt.grid > 200 ||
      opt.grid < 2) {
    throw ComplexityGuard(
        "oracle limited to m = 1, n <= 2, 0 <= K_max <= 4, 2 <= grid <= 200");
  }
  if (x0.size() != plant.n()) throw DimensionError("x0 size mismatch");
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidInput("T must be > 0");

  OracleResult result;
  result.tolerance =
      opt.tolerance > 0.0 ? opt.tolerance : 1e-9 * (1.0 + x0.norm());
  result.signal = SwitchingSignal::zero(T, 1);
  if (x0.isZero(0.0)) {
    result.feasible = true;
    result.terminal_state = Vector::Zero(plant.n());
    return result;
  }

  // Embed n = 1 plants in two dimensions with a zero second state.
  const int grid = static_cast<int>(opt.grid);
  const double dt = T / grid;
  const DiscretizedSystem cell = discretize_zoh(plant, dt);
  const Matrix eAT = expm(plant.A() * T);
  Eigen::Vector2d h = Eigen::Vector2d::Zero();
  h.head(plant.n()) = eAT * x0;

  const auto gsize = static_cast<std::size_t>(grid) + 1;
  std::vector<Eigen::Vector2d> P(gsize, Eigen::Vector2d::Zero());
  std::vector<Eigen::Vector2d> D(gsize, Eigen::Vector2d::Zero());
  for (int j = 0; j <= grid; ++j) {
    D[static_cast<std::size_t>(j)].head(plant.n()) =
        expm(plant.A() * (T - j * dt)) * plant.B().col(0);
  }
  double cell_bound = 0.0;
  for (int j = 0; j < grid; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    g.head(plant.n()) = expm(plant.A() * (T - (j + 1) * dt)) * cell.Bd.col(0);
    P[uj + 1] = P[uj] + g;
    // Bound on |P(t) - P(s)| for |t - s| <= dt around this cell.
    cell_bound = std::max(cell_bound,
                          dt * std::max(D[uj].norm(), D[uj + 1].norm()));
  }

  detail::GridSearch search(P, D, h, grid, dt, cell_bound, opt.candidates);
  for (int k = 0; k <= opt.K_max; ++k) {
    std::vector<std::vector<int>> patterns;
    std::vector<int> cur;
    detail::ternary_patterns(k, cur, patterns);
    for (const auto& pat : patterns) search.run_pattern(pat);
  }

  double best = std::numeric_limits<double>::infinity();
  for (const detail::OracleCandidate& c : search.sorted()) {
    std::vector<int> values(c.values.begin(), c.values.begin() + c.k + 1);
    Vector times(c.k);
    for (int i = 0; i < c.k; ++i) times(i) = c.time[static_cast<std::size_t>(i)] * dt;
    if (!detail::refine_switch_times(plant, x0, T, values, times,
                                     result.tolerance)) {
      continue;
    }
    SwitchingSignal sig = detail::make_signal(T, values, times);
    const std::vector<double> pts = sig.breakpoints();
    double J0 = 0.0;
    double J1 = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const int v = sig.channels[0].value_at(pts[i]);
      J0 += (v != 0 ? 1.0 : 0.0) * (pts[i + 1] - pts[i]);
      J1 += std::abs(v) * (pts[i + 1] - pts[i]);
    }
    if (J0 < best) {
      best = J0;
      result.feasible = true;
      result.signal = std::move(sig);
      result.J0 = J0;
      result.J1 = J1;
    }
  }
  result.terminal_state = result.feasible
                              ? propagate_signal(plant, x0, result.signal)
                              : Vector(propagate_signal(
                                    plant, x0, SwitchingSignal::zero(T, 1)));
  return result;
}

}  // namespace handsoff
