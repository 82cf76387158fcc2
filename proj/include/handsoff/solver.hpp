#pragma once

// Discretized reachability program for steering x(0) = x0 to x(T) = 0 with
// |u| <= 1, and its weighted-L1 (fuel-optimal) solve by two-block ADMM.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "handsoff/errors.hpp"
#include "handsoff/model.hpp"

namespace handsoff {

/// Grid size used when a problem does not pin N: 100 * ceil(T), clamped to
/// [n, 5000].
inline std::size_t default_grid_size(double T, Eigen::Index n) {
  const double raw = 100.0 * std::ceil(T);
  const double lo = static_cast<double>(n);
  return static_cast<std::size_t>(std::clamp(raw, lo, 5000.0));
}

struct ControlProblem {
  PlantModel plant;
  Vector x0;
  double T = 1.0;
  std::size_t N = 0;
  Vector lambda;

  /// Fills N and lambda with defaults when unset.
  ControlProblem(PlantModel p, Vector x0_, double T_, std::size_t N_ = 0,
                 Vector lambda_ = Vector())
      : plant(std::move(p)), x0(std::move(x0_)), T(T_), N(N_),
        lambda(std::move(lambda_)) {
    if (N == 0 && std::isfinite(T) && T > 0.0) {
      N = default_grid_size(T, plant.n());
    }
    if (lambda.size() == 0) lambda = Vector::Ones(plant.m());
    validate();
  }

  void validate() const {
    if (x0.size() != plant.n()) {
      throw DimensionError("x0 has " + std::to_string(x0.size()) +
                           " entries, plant has n = " +
                           std::to_string(plant.n()));
    }
    if (!x0.allFinite()) throw InvalidInput("x0 must be finite");
    if (!(T > 0.0) || !std::isfinite(T)) {
      throw InvalidInput("horizon T must be positive and finite");
    }
    if (static_cast<Eigen::Index>(N) * plant.m() < plant.n()) {
      throw InvalidInput("grid too coarse: need N*m >= n");
    }
    if (lambda.size() != plant.m()) {
      throw DimensionError("lambda must have m entries");
    }
    if (!lambda.allFinite() || (lambda.array() <= 0.0).any()) {
      throw InvalidInput("weights lambda must be positive and finite");
    }
  }
};

/// G u = c is the discretized terminal condition; column block k of G acts on
/// the sample u[k] held over [k dt, (k+1) dt). Samples are stored k-major:
/// flat index k*m + i.
struct ReachabilityProgram {
  Matrix G;
  Vector c;
  Vector w;
  Vector lambda;
  double box_bound = 1.0;
  double dt = 0.0;
  std::size_t N = 0;
  Eigen::Index m = 0;
  std::optional<std::string> warning;
};

enum class SolveStatus { optimal, infeasible, max_iters };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::max_iters:
      return "max_iters";
  }
  return "unknown";
}

struct AdmmSettings {
  double rho = 1.0;
  int max_iter = 20000;
  double eps_abs = 1e-8;
  double eps_rel = 1e-6;
  double eps_feas = 1e-6;
  /// Attempt an active-set polish every this many iterations (0 disables).
  int polish_every = 100;

  void validate() const {
    if (!(rho > 0.0) || max_iter <= 0 || !(eps_abs > 0.0) ||
        !(eps_rel > 0.0) || !(eps_feas > 0.0)) {
      throw InvalidArgument("ADMM settings must all be positive");
    }
  }
};

struct SolveResult {
  Matrix u;  // N x m
  SolveStatus status = SolveStatus::max_iters;
  double J1 = 0.0;
  double J0 = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

inline constexpr double kDefaultL0Threshold = 1e-3;

/// Per-channel support measure: dt * #{k : |u_i[k]| > threshold}.
inline Vector l0_measure_per_channel(const Eigen::Ref<const Matrix>& u,
                                     double dt, double threshold) {
  if (!(threshold > 0.0)) throw InvalidArgument("l0 threshold must be > 0");
  Vector out(u.cols());
  for (Eigen::Index i = 0; i < u.cols(); ++i) {
    out(i) = dt * static_cast<double>(
                      (u.col(i).array().abs() > threshold).count());
  }
  return out;
}

/// Weighted support measure sum_i lambda_i * dt * #{k : |u_i[k]| > threshold}.
/// An empty lambda means unit weights.
inline double l0_measure(const Eigen::Ref<const Matrix>& u, double dt,
                         double threshold = kDefaultL0Threshold,
                         const Vector& lambda = Vector()) {
  const Vector per = l0_measure_per_channel(u, dt, threshold);
  if (lambda.size() == 0) return per.sum();
  if (lambda.size() != u.cols()) {
    throw DimensionError("l0_measure: lambda size does not match channels");
  }
  return lambda.dot(per);
}

/// Weighted fuel sum_i lambda_i * dt * sum_k |u_i[k]|.
inline double l1_measure(const Eigen::Ref<const Matrix>& u, double dt,
                         const Vector& lambda) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < u.cols(); ++i) {
    total += lambda(i) * dt * u.col(i).cwiseAbs().sum();
  }
  return total;
}

inline ReachabilityProgram build_reachability(const ControlProblem& problem) {
  problem.validate();
  const PlantModel& plant = problem.plant;
  const Eigen::Index n = plant.n();
  const Eigen::Index m = plant.m();
  const std::size_t N = problem.N;
  const double dt = problem.T / static_cast<double>(N);
  const DiscretizedSystem d = discretize_zoh(plant, dt);

  ReachabilityProgram prog;
  prog.dt = dt;
  prog.N = N;
  prog.m = m;
  prog.lambda = problem.lambda;
  prog.G.resize(n, static_cast<Eigen::Index>(N) * m);

  // Block N-1 is Bd; block k is Ad * block k+1.
  Matrix block = d.Bd;
  for (std::size_t k = N; k-- > 0;) {
    prog.G.middleCols(static_cast<Eigen::Index>(k) * m, m) = block;
    if (k > 0) block = d.Ad * block;
  }

  Vector x = problem.x0;
  for (std::size_t k = 0; k < N; ++k) x = d.Ad * x;
  prog.c = -x;

  prog.w.resize(prog.G.cols());
  for (std::size_t k = 0; k < N; ++k) {
    prog.w.segment(static_cast<Eigen::Index>(k) * m, m) = problem.lambda * dt;
  }

  if (!is_controllable(plant).controllable) {
    prog.warning =
        "plant is not controllable; the terminal condition may be unreachable";
  }
  if (!prog.G.allFinite() || !prog.c.allFinite()) {
    throw NumericalFailure("reachability matrices overflowed; shorten T");
  }
  return prog;
}

namespace detail {

/// Orthogonal projection onto {u : G u = c} using a Cholesky factor of G G^T.
class AffineProjector {
 public:
  explicit AffineProjector(const ReachabilityProgram& prog)
      : G_(prog.G), c_(prog.c) {
    const Matrix GGt = G_ * G_.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(GGt, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().maxCoeff();
    const double lo = eig.eigenvalues().minCoeff();
    if (!(hi > 0.0) || !(lo > 1e-14 * hi)) {
      throw DegenerateProgram(
          "G G^T is numerically singular; check controllability or increase N");
    }
    llt_.compute(GGt);
    if (llt_.info() != Eigen::Success) {
      throw DegenerateProgram(
          "G G^T factorization failed; check controllability or increase N");
    }
  }

  void project(const Vector& v, Vector& out) const {
    const Vector r = G_ * v - c_;
    out = v - G_.transpose() * llt_.solve(r);
  }

  double residual(const Vector& u) const { return (G_ * u - c_).norm(); }

  const Eigen::LLT<Matrix>& factor() const noexcept { return llt_; }

 private:
  const Matrix& G_;
  const Vector& c_;
  Eigen::LLT<Matrix> llt_;
};

inline void clip(Vector& v, double bound) {
  v = v.cwiseMax(-bound).cwiseMin(bound);
}

/// Residual-stall detector: true when the tracked value has not dropped by
/// at least 1% over the last `window` checks while above `floor`.
class StallDetector {
 public:
  StallDetector(int window, double floor) : window_(window), floor_(floor) {}

  bool update(int iteration, double value) {
    if (iteration % window_ != 0) return false;
    const bool stalled =
        has_ref_ && value > floor_ && value > 0.99 * reference_;
    reference_ = value;
    has_ref_ = true;
    return stalled;
  }

 private:
  int window_;
  double floor_;
  double reference_ = 0.0;
  bool has_ref_ = false;
};

inline Matrix unflatten(const Vector& flat, std::size_t N, Eigen::Index m) {
  Matrix u(static_cast<Eigen::Index>(N), m);
  for (std::size_t k = 0; k < N; ++k) {
    for (Eigen::Index i = 0; i < m; ++i) {
      u(static_cast<Eigen::Index>(k), i) =
          flat(static_cast<Eigen::Index>(k) * m + i);
    }
  }
  return u;
}

}  // namespace detail

struct FeasibilityResult {
  bool feasible = false;
  double residual = 0.0;
};

/// Alternating projection between {G u = c} and the box.
inline FeasibilityResult check_feasible(const ReachabilityProgram& prog,
                                        const AdmmSettings& settings = {}) {
  settings.validate();
  const Eigen::Index p = prog.G.cols();
  const detail::AffineProjector proj(prog);

  Vector box = Vector::Zero(p);
  Vector aff(p);
  detail::StallDetector stall(500, 1e3 * settings.eps_feas);
  double gap = 0.0;
  for (int it = 1; it <= settings.max_iter; ++it) {
    proj.project(box, aff);
    box = aff;
    detail::clip(box, prog.box_bound);
    gap = (aff - box).norm();
    if (gap <= settings.eps_feas) return {true, gap};
    if (stall.update(it, gap)) break;
  }
  return {false, gap};
}

namespace detail {

/// Active-set polish. The dual estimate mu (switching function a = G^T mu)
/// fixes every sample to sign(a_j) or 0; the samples closest to the switch
/// threshold |a_j| = w_j are solved for exactly. Accepted only when the
/// result is primal feasible and the duality gap certifies optimality.
inline bool polish(const ReachabilityProgram& prog, const Eigen::LLT<Matrix>& llt,
                   const Vector& w, const Vector& dual_guess,
                   const AdmmSettings& settings, Vector& u_out) {
  const Matrix& G = prog.G;
  const Eigen::Index n = G.rows();
  const Eigen::Index p = G.cols();
  Vector mu = llt.solve(G * dual_guess);

  for (int pass = 0; pass < 2; ++pass) {
    const Vector a = G.transpose() * mu;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) order[static_cast<std::size_t>(j)] = j;
    const Eigen::Index pool = std::min<Eigen::Index>(p, 2 * n + 2);
    std::partial_sort(order.begin(), order.begin() + pool, order.end(),
                      [&](Eigen::Index i, Eigen::Index j) {
                        return std::abs(std::abs(a(i)) - w(i)) <
                               std::abs(std::abs(a(j)) - w(j));
                      });

    Vector fixed(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      fixed(j) = std::abs(a(j)) > w(j) ? (a(j) > 0 ? 1.0 : -1.0) : 0.0;
    }
    fixed *= prog.box_bound;

    bool refined = false;
    for (Eigen::Index k = n; k <= pool && !refined; ++k) {
      Vector u = fixed;
      Matrix GF(n, k);
      for (Eigen::Index i = 0; i < k; ++i) {
        u(order[static_cast<std::size_t>(i)]) = 0.0;
        GF.col(i) = G.col(order[static_cast<std::size_t>(i)]);
      }
      const Vector rhs = prog.c - G * u;
      const Vector uF = GF.completeOrthogonalDecomposition().solve(rhs);
      if ((uF.array().abs() > prog.box_bound + settings.eps_feas).any()) continue;
      for (Eigen::Index i = 0; i < k; ++i) {
        u(order[static_cast<std::size_t>(i)]) =
            std::clamp(uF(i), -prog.box_bound, prog.box_bound);
      }
      if ((G * u - prog.c).norm() > settings.eps_feas) continue;

      // Duality gap: sum_j w_j|u_j| - (mu^T c - sum_j max(0, |a_j| - w_j)).
      const double primal = w.dot(u.cwiseAbs());
      const double dual =
          mu.dot(prog.c) - ((a.cwiseAbs() - w).cwiseMax(0.0)).sum() * prog.box_bound;
      if (primal - dual <= settings.eps_rel * (1.0 + std::abs(primal))) {
        u_out = u;
        return true;
      }

      // Re-derive mu from the fractional samples and try once more.
      std::vector<Eigen::Index> frac;
      for (Eigen::Index i = 0; i < k; ++i) {
        const double v = std::abs(uF(i));
        if (v > 1e-9 && v < prog.box_bound - 1e-9) {
          frac.push_back(order[static_cast<std::size_t>(i)]);
        }
      }
      if (pass == 0 && static_cast<Eigen::Index>(frac.size()) >= n) {
        Matrix GfT(static_cast<Eigen::Index>(frac.size()), n);
        Vector rhs_mu(static_cast<Eigen::Index>(frac.size()));
        for (std::size_t i = 0; i < frac.size(); ++i) {
          const auto e = static_cast<Eigen::Index>(i);
          GfT.row(e) = G.col(frac[i]).transpose();
          rhs_mu(e) = w(frac[i]) * (u(frac[i]) > 0 ? 1.0 : -1.0);
        }
        mu = GfT.completeOrthogonalDecomposition().solve(rhs_mu);
        refined = true;
      }
    }
    if (!refined) break;
  }
  return false;
}

}  // namespace detail

/// Minimizes sum_j w_j |u_j| subject to G u = c and |u_j| <= 1.
///
/// Splitting: x-block projects onto the affine set, z-block applies the
/// weighted soft threshold followed by clipping to the box. The weights are
/// normalized by their mean before the iteration, so rho is relative to a
/// unit-scale objective and does not depend on dt or on the lambda scale.
/// Every `polish_every` iterations an active-set polish is attempted; it ends
/// the solve when it produces a certified vertex.
inline SolveResult solve_l1(const ReachabilityProgram& prog,
                            const AdmmSettings& settings = {}) {
  settings.validate();
  const Eigen::Index p = prog.G.cols();
  const detail::AffineProjector proj(prog);

  SolveResult result;
  const double bound = prog.box_bound;
  const double rho = settings.rho;
  const Vector w = prog.w / prog.w.mean();
  const Vector thresh = w / rho;
  const double sqrt_p = std::sqrt(static_cast<double>(p));

  Vector x = Vector::Zero(p);
  Vector z = Vector::Zero(p);
  Vector y = Vector::Zero(p);  // scaled dual
  Vector z_prev(p);
  Vector v(p);
  Vector polished;
  detail::StallDetector stall(500, 1e3 * settings.eps_feas);
  bool stall_checked = false;

  result.status = SolveStatus::max_iters;
  int it = 0;
  for (it = 1; it <= settings.max_iter; ++it) {
    proj.project(z - y, x);

    z_prev = z;
    v = x + y;
    z = (v.array().abs() - thresh.array()).max(0.0) * v.array().sign();
    detail::clip(z, bound);

    y += x - z;

    const double r = (x - z).norm();
    const double s = rho * (z - z_prev).norm();
    result.primal_residual = r;
    result.dual_residual = s;

    const double eps_pri =
        sqrt_p * settings.eps_abs + settings.eps_rel * std::max(x.norm(), z.norm());
    const double eps_dual =
        sqrt_p * settings.eps_abs + settings.eps_rel * rho * y.norm();
    if (r <= eps_pri && s <= eps_dual &&
        proj.residual(z) <= settings.eps_feas) {
      result.status = SolveStatus::optimal;
      break;
    }
    if (settings.polish_every > 0 && it % settings.polish_every == 0 &&
        detail::polish(prog, proj.factor(), w, rho * y, settings, polished)) {
      z = polished;
      result.primal_residual = proj.residual(z);
      result.status = SolveStatus::optimal;
      break;
    }
    if (!stall_checked && stall.update(it, r)) {
      // A stall alone is not proof; confirm with alternating projections.
      stall_checked = true;
      if (!check_feasible(prog, settings).feasible) {
        result.status = SolveStatus::infeasible;
        break;
      }
    }
  }
  result.iterations = std::min(it, settings.max_iter);

  result.u = detail::unflatten(z, prog.N, prog.m);
  result.J1 = l1_measure(result.u, prog.dt, prog.lambda);
  result.J0 = l0_measure(result.u, prog.dt, kDefaultL0Threshold, prog.lambda);
  return result;
}

struct MinimumTimeOptions {
  double N_per_unit = 100.0;
  double tol = 1e-2;
  /// Search gives up above cap_factor times the heuristic bound
  /// n * max(1, |x0|_inf).
  double cap_factor = 10.0;
  AdmmSettings settings{};
};

/// Bisection on T over check_feasible; returns the feasible end of the final
/// bracket.
inline double minimum_time(const PlantModel& plant, const Vector& x0,
                           const MinimumTimeOptions& opt = {}) {
  if (x0.size() != plant.n()) throw DimensionError("x0 size mismatch");
  if (!x0.allFinite()) throw InvalidInput("x0 must be finite");
  if (!(opt.tol > 0.0) || !(opt.N_per_unit > 0.0)) {
    throw InvalidArgument("minimum_time: tol and grid density must be > 0");
  }
  if (x0.isZero(0.0)) return 0.0;

  const auto feasible_at = [&](double T) {
    const double raw = std::ceil(opt.N_per_unit * T);
    const auto N = static_cast<std::size_t>(
        std::clamp(raw, static_cast<double>(plant.n()), 5000.0));
    try {
      const ControlProblem problem(plant, x0, T, N);
      return check_feasible(build_reachability(problem), opt.settings).feasible;
    } catch (const DegenerateProgram&) {
      return false;
    } catch (const NumericalFailure&) {
      return false;
    }
  };

  const double heuristic =
      static_cast<double>(plant.n()) * std::max(1.0, x0.lpNorm<Eigen::Infinity>());
  const double cap = opt.cap_factor * heuristic;

  double lo = 0.0;
  double hi = heuristic / 8.0;
  while (!feasible_at(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > cap) {
      if (feasible_at(cap)) {
        hi = cap;
        break;
      }
      throw UnboundedSearch("no feasible horizon found below T = " +
                            std::to_string(cap));
    }
  }
  while (hi - lo > opt.tol) {
    const double mid = 0.5 * (lo + hi);
    if (feasible_at(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace handsoff
