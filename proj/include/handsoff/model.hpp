#pragma once

// Linear-systems kernel: matrix exponential, zero-order-hold discretization,
// Kalman rank test, spectral quantities and exact propagation of
//   dx/dt = A x + B u
// under piecewise-constant input.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include "handsoff/errors.hpp"

namespace handsoff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline std::string shape(const Eigen::Ref<const Matrix>& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

}  // namespace detail

/// Continuous-time LTI plant (A, B).
class PlantModel {
 public:
  PlantModel(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
    if (A_.rows() < 1 || A_.rows() != A_.cols()) {
      throw DimensionError("A must be square and non-empty, got " +
                           detail::shape(A_));
    }
    if (B_.rows() != A_.rows() || B_.cols() < 1) {
      throw DimensionError("B must have " + std::to_string(A_.rows()) +
                           " rows and at least one column, got " +
                           detail::shape(B_));
    }
    if (!A_.allFinite() || !B_.allFinite()) {
      throw InvalidInput("plant matrices contain non-finite entries");
    }
  }

  const Matrix& A() const noexcept { return A_; }
  const Matrix& B() const noexcept { return B_; }
  Eigen::Index n() const noexcept { return A_.rows(); }
  Eigen::Index m() const noexcept { return B_.cols(); }

 private:
  Matrix A_;
  Matrix B_;
};

struct DiscretizedSystem {
  Matrix Ad;
  Matrix Bd;
  double dt = 0.0;
};

struct SpectralInfo {
  std::vector<std::complex<double>> eigenvalues;
  double omega = 0.0;
  bool a_nonsingular = true;
};

struct ControllabilityResult {
  bool controllable = false;
  Eigen::Index rank = 0;
};

/// Matrix exponential by scaling and squaring with the degree-13 Pade
/// approximant (Higham 2005).
inline Matrix expm(const Eigen::Ref<const Matrix>& M) {
  if (M.rows() != M.cols()) {
    throw DimensionError("expm needs a square matrix, got " + detail::shape(M));
  }
  if (M.hasNaN()) throw InvalidInput("expm: NaN entry");
  if (!M.allFinite()) throw InvalidInput("expm: infinite entry");

  const Eigen::Index n = M.rows();
  if (n == 0) return Matrix(0, 0);

  static constexpr double b[] = {64764752532480000.0,
                                 32382376266240000.0,
                                 7771770303897600.0,
                                 1187353796428800.0,
                                 129060195264000.0,
                                 10559470521600.0,
                                 670442572800.0,
                                 33522128640.0,
                                 1323241920.0,
                                 40840800.0,
                                 960960.0,
                                 16380.0,
                                 182.0,
                                 1.0};
  constexpr double theta13 = 5.371920351148152;

  const double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  }
  const Matrix S = M / std::ldexp(1.0, squarings);
  const Matrix I = Matrix::Identity(n, n);
  const Matrix S2 = S * S;
  const Matrix S4 = S2 * S2;
  const Matrix S6 = S4 * S2;

  const Matrix U_inner = b[13] * S6 + b[11] * S4 + b[9] * S2;
  const Matrix U = S * (S6 * U_inner + b[7] * S6 + b[5] * S4 + b[3] * S2 +
                        b[1] * I);
  const Matrix V_inner = b[12] * S6 + b[10] * S4 + b[8] * S2;
  const Matrix V =
      S6 * V_inner + b[6] * S6 + b[4] * S4 + b[2] * S2 + b[0] * I;

  Matrix E = (V - U).partialPivLu().solve(V + U);
  for (int i = 0; i < squarings; ++i) E = E * E;
  return E;
}

/// Exact ZOH map via the exponential of the block matrix [[A, B], [0, 0]]·dt.
inline DiscretizedSystem discretize_zoh(const PlantModel& plant, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InvalidArgument("discretize_zoh: dt must be positive and finite");
  }
  const Eigen::Index n = plant.n();
  const Eigen::Index m = plant.m();
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = plant.A() * dt;
  aug.topRightCorner(n, m) = plant.B() * dt;
  const Matrix E = expm(aug);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, m), dt};
}

/// Kalman rank test on [B, AB, ..., A^{n-1}B]. The rank uses column-pivoted
/// Householder QR with a pivot threshold relative to the largest pivot.
inline ControllabilityResult is_controllable(const PlantModel& plant,
                                             double rtol = 1e-10) {
  const Eigen::Index n = plant.n();
  const Eigen::Index m = plant.m();
  Matrix K(n, n * m);
  K.leftCols(m) = plant.B();
  for (Eigen::Index i = 1; i < n; ++i) {
    K.middleCols(i * m, m) = plant.A() * K.middleCols((i - 1) * m, m);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(K);
  qr.setThreshold(rtol);
  const Eigen::Index rank = qr.rank();
  return {rank == n, rank};
}

/// Eigenvalues (Hessenberg reduction + shifted QR), omega = max |Im(lambda)|
/// and the nonsingularity flag min|lambda| > 1e-9 * max(1, max|lambda|).
inline SpectralInfo spectral_info(const Eigen::Ref<const Matrix>& A) {
  if (A.rows() != A.cols() || A.rows() < 1) {
    throw DimensionError("spectral_info needs a square matrix, got " +
                         detail::shape(A));
  }
  if (A.rows() > 16) {
    throw InvalidArgument("spectral_info supports n <= 16, got n = " +
                          std::to_string(A.rows()));
  }
  if (!A.allFinite()) throw InvalidInput("spectral_info: non-finite entry");

  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<Matrix> es;
  es.setMaxIterations(100 * n);
  es.compute(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("spectral_info: shifted QR did not converge within " +
                           std::to_string(100 * n) + " iterations");
  }

  SpectralInfo info;
  double min_abs = std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    info.eigenvalues.push_back(lam);
    info.omega = std::max(info.omega, std::abs(lam.imag()));
    min_abs = std::min(min_abs, std::abs(lam));
    max_abs = std::max(max_abs, std::abs(lam));
  }
  info.a_nonsingular = min_abs > 1e-9 * std::max(1.0, max_abs);
  return info;
}

/// x(tau) for constant input u over [0, tau].
inline Vector propagate_segment(const PlantModel& plant,
                                const Eigen::Ref<const Vector>& x,
                                const Eigen::Ref<const Vector>& u_const,
                                double tau) {
  if (x.size() != plant.n() || u_const.size() != plant.m()) {
    throw DimensionError("propagate_segment: x or u has the wrong size");
  }
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("propagate_segment: tau must be >= 0");
  }
  if (tau == 0.0) return x;
  const DiscretizedSystem d = discretize_zoh(plant, tau);
  return d.Ad * x + d.Bd * u_const;
}

}  // namespace handsoff
