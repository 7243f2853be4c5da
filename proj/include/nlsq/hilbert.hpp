#ifndef NLSQ_HILBERT_HPP
#define NLSQ_HILBERT_HPP

// Truncated Fock-space numerics for a single bosonic mode.
//
// Conventions: hbar = 1, q = (b + b^dag)/sqrt(2), p = i(b^dag - b)/sqrt(2),
// so the vacuum has <q^2> = <p^2> = 1/2. The rotated quadrature is
// Q_phi = (b e^{-i phi} + b^dag e^{i phi})/sqrt(2), with Q_0 = q and
// Q_{pi/2} = p.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nlsq/errors.hpp"

namespace nlsq {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Numerical tolerances shared by the Hilbert-space routines.
struct Tolerances {
  double leakage = 1e-8;            // norm lost to truncation
  double tail_population = 1e-8;    // population of the top Fock levels
  double imaginary_residue = 1e-10;
  double hermiticity = 1e-12;
  double trace = 1e-10;
  double negativity = 1e-10;        // smallest admissible eigenvalue / density
  double normalization = 1e-4;      // marginal normalization deficit
  int max_order = 8;
};

inline constexpr double kGridMargin = 2.0;

// ---------------------------------------------------------------------------
// Position grid

/// Uniform position grid. Use `symmetric` or `for_dimension` to build one;
/// `from_points` accepts arbitrary samples and defers validation to
/// build_basis.
class PositionGrid {
 public:
  static PositionGrid symmetric(double half_extent, std::size_t count) {
    if (!(half_extent > 0.0) || count < 3) {
      throw NumericalError(NumericalError::Kind::grid,
                           "grid needs a positive extent and at least 3 points");
    }
    std::vector<double> x(count);
    const double h = 2.0 * half_extent / static_cast<double>(count - 1);
    for (std::size_t j = 0; j < count; ++j) {
      // Mirror the lower half so the grid is exactly symmetric.
      const std::size_t k = std::min(j, count - 1 - j);
      const double v = -half_extent + h * static_cast<double>(k);
      x[j] = (j == k) ? v : -v;
    }
    if (count % 2 == 1) x[count / 2] = 0.0;
    return PositionGrid(std::move(x));
  }

  /// Default grid for Fock dimension N: covers the classically allowed region
  /// of the top basis function with a margin, spacing <= 1/100.
  static PositionGrid for_dimension(std::size_t dimension) {
    const double needed = std::sqrt(2.0 * static_cast<double>(dimension) + 1.0) + kGridMargin;
    const double half = std::max(20.0, std::ceil(needed));
    std::size_t count = static_cast<std::size_t>(std::ceil(2.0 * half * 102.4)) + 1;
    if (count % 2 == 0) ++count;
    return symmetric(half, count);
  }

  static PositionGrid from_points(std::vector<double> points) {
    if (points.size() < 3) {
      throw NumericalError(NumericalError::Kind::grid, "grid needs at least 3 points");
    }
    return PositionGrid(std::move(points));
  }

  std::span<const double> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double spacing() const { return spacing_; }
  double half_extent() const { return std::max(-points_.front(), points_.back()); }
  double operator[](std::size_t j) const { return points_[j]; }

  /// Throws unless the grid is uniform, increasing and symmetric about zero.
  void validate() const {
    const double h = spacing_;
    if (!(h > 0.0)) {
      throw NumericalError(NumericalError::Kind::grid, "grid points must increase");
    }
    const std::size_t n = points_.size();
    for (std::size_t j = 0; j + 1 < n; ++j) {
      if (std::abs(points_[j + 1] - points_[j] - h) > 1e-9 * h) {
        throw NumericalError(NumericalError::Kind::grid,
                             "grid is not uniformly spaced at index " + std::to_string(j));
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(points_[j] + points_[n - 1 - j]) > 1e-9 * h) {
        throw NumericalError(NumericalError::Kind::grid, "grid is not symmetric about zero");
      }
    }
  }

 private:
  explicit PositionGrid(std::vector<double> x)
      : points_(std::move(x)),
        spacing_((points_.back() - points_.front()) / static_cast<double>(points_.size() - 1)) {}

  std::vector<double> points_;
  double spacing_;
};

// ---------------------------------------------------------------------------
// Hermite-function basis

/// Orthonormal oscillator eigenfunctions h_n(x_j), n < N, sampled on a grid.
class HermiteBasis {
 public:
  std::size_t dimension() const { return static_cast<std::size_t>(values_.rows()); }
  const PositionGrid& grid() const { return grid_; }
  /// N x P matrix, row n holds h_n on the grid.
  const Eigen::MatrixXd& values() const { return values_; }
  double operator()(std::size_t n, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j));
  }

 private:
  friend HermiteBasis build_basis(std::size_t, PositionGrid);
  HermiteBasis(PositionGrid grid, Eigen::MatrixXd values)
      : grid_(std::move(grid)), values_(std::move(values)) {}

  PositionGrid grid_;
  Eigen::MatrixXd values_;
};

/// Evaluates h_0..h_{N-1} at x with the normalized upward recurrence
/// h_{n+1} = sqrt(2/(n+1)) x h_n - sqrt(n/(n+1)) h_{n-1}.
inline void hermite_functions(double x, std::span<double> out) {
  if (out.empty()) return;
  out[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  if (out.size() == 1) return;
  out[1] = std::numbers::sqrt2 * x * out[0];
  for (std::size_t n = 1; n + 1 < out.size(); ++n) {
    const double nd = static_cast<double>(n);
    out[n + 1] = std::sqrt(2.0 / (nd + 1.0)) * x * out[n] - std::sqrt(nd / (nd + 1.0)) * out[n - 1];
  }
}

inline HermiteBasis build_basis(std::size_t dimension, PositionGrid grid) {
  if (dimension < 2) {
    throw NumericalError(NumericalError::Kind::extent, "basis dimension must be >= 2");
  }
  grid.validate();
  const double needed = std::sqrt(2.0 * static_cast<double>(dimension) + 1.0) + kGridMargin;
  if (grid.half_extent() < needed) {
    throw NumericalError(NumericalError::Kind::extent,
                         "grid half-extent " + std::to_string(grid.half_extent()) +
                             " does not cover dimension " + std::to_string(dimension) +
                             " (need >= " + std::to_string(needed) + ")");
  }
  const auto rows = static_cast<Eigen::Index>(dimension);
  const auto cols = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd values(rows, cols);
  std::vector<double> column(dimension);
  for (Eigen::Index j = 0; j < cols; ++j) {
    hermite_functions(grid[static_cast<std::size_t>(j)], column);
    for (Eigen::Index n = 0; n < rows; ++n) values(n, j) = column[static_cast<std::size_t>(n)];
  }
  return HermiteBasis(std::move(grid), std::move(values));
}

// ---------------------------------------------------------------------------
// Density matrices

class QuantumState {
 public:
  /// Validates Hermiticity, unit trace and positivity.
  static QuantumState from_density(ComplexMatrix rho, double leakage = 0.0,
                                   const Tolerances& tol = {}) {
    if (rho.rows() != rho.cols() || rho.rows() < 2) {
      throw NumericalError(NumericalError::Kind::hermiticity, "density matrix must be square, N >= 2");
    }
    if (!rho.allFinite()) {
      throw NumericalError(NumericalError::Kind::data, "density matrix has non-finite entries");
    }
    const double asym = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (asym > tol.hermiticity) {
      throw NumericalError(NumericalError::Kind::hermiticity,
                           "density matrix deviates from Hermitian by " + std::to_string(asym));
    }
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > tol.trace) {
      throw NumericalError(NumericalError::Kind::normalization,
                           "density matrix trace " + std::to_string(tr) + " != 1");
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho, Eigen::EigenvaluesOnly);
    const double smallest = es.eigenvalues().minCoeff();
    if (smallest < -tol.negativity) {
      throw NumericalError(NumericalError::Kind::hermiticity,
                           "density matrix is not positive semidefinite (eigenvalue " +
                               std::to_string(smallest) + ")");
    }
    if (!(leakage >= 0.0) || leakage > tol.leakage) {
      throw NumericalError(NumericalError::Kind::truncation,
                           "truncation leakage " + std::to_string(leakage) +
                               " exceeds tolerance; increase the Fock dimension or grid");
    }
    return QuantumState(std::move(rho), leakage);
  }

  /// Pure state |psi><psi| from Fock amplitudes; the amplitudes are normalized.
  static QuantumState from_amplitudes(const ComplexVector& psi, double leakage = 0.0,
                                      const Tolerances& tol = {}) {
    const double norm = psi.norm();
    if (!(norm > 0.0)) {
      throw NumericalError(NumericalError::Kind::normalization, "zero state vector");
    }
    const ComplexVector v = psi / norm;
    return from_density(v * v.adjoint(), leakage, tol);
  }

  std::size_t dimension() const { return static_cast<std::size_t>(rho_.rows()); }
  const ComplexMatrix& rho() const { return rho_; }
  double leakage() const { return leakage_; }
  double purity() const { return (rho_ * rho_).trace().real(); }
  double population(std::size_t n) const {
    return rho_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)).real();
  }

 private:
  QuantumState(ComplexMatrix rho, double leakage) : rho_(std::move(rho)), leakage_(leakage) {}

  ComplexMatrix rho_;
  double leakage_;
};

/// Mixes states with the given nonnegative weights (renormalized).
inline QuantumState mixture(std::span<const QuantumState> states, std::span<const double> weights,
                            const Tolerances& tol = {}) {
  if (states.empty() || states.size() != weights.size()) {
    throw ConfigError("mixture needs one weight per state");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("mixture weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("mixture weights sum to zero");
  ComplexMatrix rho = ComplexMatrix::Zero(states[0].rho().rows(), states[0].rho().cols());
  double leak = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    rho += (weights[i] / total) * states[i].rho();
    leak = std::max(leak, states[i].leakage());
  }
  return QuantumState::from_density(std::move(rho), leak, tol);
}

namespace detail {

/// Annihilation operator in dimension M.
inline ComplexMatrix annihilation(Eigen::Index m) {
  ComplexMatrix b = ComplexMatrix::Zero(m, m);
  for (Eigen::Index k = 0; k + 1 < m; ++k) b(k, k + 1) = std::sqrt(static_cast<double>(k + 1));
  return b;
}

/// rho zero-padded to dimension M.
inline ComplexMatrix padded(const ComplexMatrix& rho, Eigen::Index m) {
  ComplexMatrix out = ComplexMatrix::Zero(m, m);
  out.topLeftCorner(rho.rows(), rho.cols()) = rho;
  return out;
}

/// X * Q_phi for tridiagonal Q_phi, O(M^2).
inline ComplexMatrix times_quadrature(const ComplexMatrix& x, double phi) {
  const Eigen::Index m = x.rows();
  const cplx lower = std::polar(1.0 / std::numbers::sqrt2, phi);   // Q_{k+1,k}
  const cplx upper = std::conj(lower);                               // Q_{k,k+1}
  ComplexMatrix out = ComplexMatrix::Zero(m, m);
  for (Eigen::Index k = 0; k + 1 < m; ++k) {
    const double s = std::sqrt(static_cast<double>(k + 1));
    out.col(k + 1) += (s * upper) * x.col(k);
    out.col(k) += (s * lower) * x.col(k + 1);
  }
  return out;
}

inline double checked_real(cplx value, const Tolerances& tol, const char* what) {
  if (std::abs(value.imag()) > tol.imaginary_residue * std::max(1.0, std::abs(value.real()))) {
    throw NumericalError(NumericalError::Kind::hermiticity,
                         std::string(what) + " has imaginary residue " + std::to_string(value.imag()));
  }
  return value.real();
}

inline void check_tail(const QuantumState& state, int n, const Tolerances& tol) {
  const std::size_t dim = state.dimension();
  const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(n), dim);
  double tail = 0.0;
  for (std::size_t k = dim - top; k < dim; ++k) tail += state.population(k);
  if (tail > tol.tail_population) {
    throw NumericalError(NumericalError::Kind::truncation,
                         "top Fock levels carry population " + std::to_string(tail) +
                             "; increase the truncation dimension");
  }
}

}  // namespace detail

/// <Q_phi^n> = tr(rho Q_phi^n).
///
/// The state is zero-padded by n levels before the operator products so the
/// truncation of Q_phi itself introduces no error.
inline double quadrature_moment(const QuantumState& state, double phi, int n,
                                const Tolerances& tol = {}) {
  if (n < 0 || n > tol.max_order) {
    throw NumericalError(NumericalError::Kind::unsupported_order,
                         "moment order " + std::to_string(n) + " outside [0, " +
                             std::to_string(tol.max_order) + "]");
  }
  if (n == 0) return state.rho().trace().real();
  detail::check_tail(state, n, tol);
  const Eigen::Index m = static_cast<Eigen::Index>(state.dimension()) + n;
  ComplexMatrix x = detail::padded(state.rho(), m);
  for (int k = 0; k < n; ++k) x = detail::times_quadrature(x, phi);
  return detail::checked_real(x.trace(), tol, "quadrature moment");
}

/// <p q^2 + q^2 p>, evaluated directly from operator products.
inline double symmetrized_pq2(const QuantumState& state, const Tolerances& tol = {}) {
  detail::check_tail(state, 3, tol);
  const Eigen::Index m = static_cast<Eigen::Index>(state.dimension()) + 3;
  const ComplexMatrix b = detail::annihilation(m);
  const ComplexMatrix q = (b + b.adjoint()) / std::numbers::sqrt2;
  const ComplexMatrix p = cplx(0.0, 1.0) * (b.adjoint() - b) / std::numbers::sqrt2;
  const ComplexMatrix q2 = q * q;
  const ComplexMatrix op = p * q2 + q2 * p;
  const ComplexMatrix rho = detail::padded(state.rho(), m);
  return detail::checked_real((rho * op).trace(), tol, "mixed moment");
}

/// rho' = e^{-i phi n} rho e^{i phi n}: the position marginal of rho' is the
/// distribution of Q_phi in rho.
inline ComplexMatrix rotate(const ComplexMatrix& rho, double phi) {
  const Eigen::Index n = rho.rows();
  ComplexVector phase(n);
  for (Eigen::Index k = 0; k < n; ++k) phase(k) = std::polar(1.0, -phi * static_cast<double>(k));
  return phase.asDiagonal() * rho * phase.conjugate().asDiagonal();
}

/// Probability density of Q_phi sampled on the basis grid.
struct MarginalDensity {
  std::vector<double> x;
  std::vector<double> density;
  double spacing = 0.0;

  /// Trapezoid integral of x^n times the density.
  double moment(int n) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double w = (j == 0 || j + 1 == x.size()) ? 0.5 : 1.0;
      acc += w * std::pow(x[j], n) * density[j];
    }
    return acc * spacing;
  }
};

inline MarginalDensity marginal_density(const QuantumState& state, double phi,
                                        const HermiteBasis& basis, const Tolerances& tol = {}) {
  if (basis.dimension() != state.dimension()) {
    throw NumericalError(NumericalError::Kind::grid, "basis and state dimensions differ");
  }
  const Eigen::MatrixXd& h = basis.values();
  const ComplexMatrix a = rotate(state.rho(), phi) * h;
  const Eigen::VectorXd pr = (h.array() * a.real().array()).colwise().sum().transpose();

  MarginalDensity out;
  out.spacing = basis.grid().spacing();
  out.x.assign(basis.grid().points().begin(), basis.grid().points().end());
  out.density.resize(out.x.size());
  for (std::size_t j = 0; j < out.x.size(); ++j) {
    double v = pr(static_cast<Eigen::Index>(j));
    if (v < -tol.negativity) {
      throw NumericalError(NumericalError::Kind::grid,
                           "marginal density negative (" + std::to_string(v) + ") at x=" +
                               std::to_string(out.x[j]));
    }
    out.density[j] = std::max(v, 0.0);
  }
  const double total = out.moment(0);
  if (std::abs(total - 1.0) > tol.normalization) {
    throw NumericalError(NumericalError::Kind::normalization,
                         "marginal integrates to " + std::to_string(total) +
                             "; enlarge the grid or the Fock dimension");
  }
  return out;
}

/// D(alpha) rho D(alpha)^dag, with D built by exponentiating alpha b^dag - alpha* b
/// in a doubled dimension; the norm pushed beyond N is reported as leakage.
inline QuantumState displace(const QuantumState& state, cplx alpha, const Tolerances& tol = {}) {
  if (alpha == cplx(0.0, 0.0)) return state;
  const Eigen::Index n = static_cast<Eigen::Index>(state.dimension());
  const Eigen::Index m = 2 * n;
  const ComplexMatrix b = detail::annihilation(m);
  const ComplexMatrix generator = alpha * b.adjoint() - std::conj(alpha) * b;
  const ComplexMatrix d = generator.exp();
  const ComplexMatrix big = d * detail::padded(state.rho(), m) * d.adjoint();
  ComplexMatrix rho = big.topLeftCorner(n, n);
  const double kept = rho.trace().real();
  const double leakage = state.leakage() + std::max(0.0, 1.0 - kept);
  if (leakage > tol.leakage) {
    throw NumericalError(NumericalError::Kind::truncation,
                         "displacement leaks " + std::to_string(leakage) +
                             " of the norm; increase the Fock dimension");
  }
  rho /= kept;
  return QuantumState::from_density(std::move(rho), leakage, tol);
}

}  // namespace nlsq

#endif
