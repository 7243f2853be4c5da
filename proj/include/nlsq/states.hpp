#ifndef NLSQ_STATES_HPP
#define NLSQ_STATES_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "nlsq/errors.hpp"
#include "nlsq/hilbert.hpp"

namespace nlsq {

enum class StateKind { vacuum, coherent, thermal, cubic_phase, displaced };

inline std::string_view to_string(StateKind k) {
  switch (k) {
    case StateKind::vacuum: return "vacuum";
    case StateKind::coherent: return "coherent";
    case StateKind::thermal: return "thermal";
    case StateKind::cubic_phase: return "cubic_phase";
    case StateKind::displaced: return "displaced";
  }
  return "?";
}

inline StateKind parse_state_kind(std::string_view s) {
  for (auto k : {StateKind::vacuum, StateKind::coherent, StateKind::thermal,
                 StateKind::cubic_phase, StateKind::displaced}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown state kind '" + std::string(s) + "'");
}

/// Mechanical state description. For `displaced`, `inner` selects the state
/// that D(alpha) acts on; it reuses beta / n_bar / gamma.
struct StateSpec {
  StateKind kind = StateKind::vacuum;
  cplx beta{0.0, 0.0};
  double n_bar = 0.0;
  double gamma = 0.0;
  cplx alpha{0.0, 0.0};
  StateKind inner = StateKind::vacuum;
  std::size_t dimension = 128;
  double gamma_max = 0.5;

  void validate() const {
    auto finite = [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
    if (dimension < 2) throw ConfigError("state dimension must be >= 2");
    if (!finite(beta) || !finite(alpha) || !std::isfinite(gamma) || !std::isfinite(n_bar)) {
      throw ConfigError("state parameters must be finite");
    }
    const StateKind base = kind == StateKind::displaced ? inner : kind;
    if (kind == StateKind::displaced && inner == StateKind::displaced) {
      throw ConfigError("displaced state cannot wrap another displaced state");
    }
    if (base == StateKind::thermal && n_bar < 0.0) throw ConfigError("thermal n_bar must be >= 0");
    if (base == StateKind::cubic_phase && std::abs(gamma) > gamma_max) {
      throw ConfigError("|gamma| = " + std::to_string(std::abs(gamma)) + " exceeds gamma_max " +
                        std::to_string(gamma_max));
    }
  }
};

inline StateSpec vacuum_spec(std::size_t n = 128) { return {.kind = StateKind::vacuum, .dimension = n}; }
inline StateSpec coherent_spec(cplx beta, std::size_t n = 128) {
  return {.kind = StateKind::coherent, .beta = beta, .dimension = n};
}
inline StateSpec thermal_spec(double n_bar, std::size_t n = 128) {
  return {.kind = StateKind::thermal, .n_bar = n_bar, .dimension = n};
}
inline StateSpec cubic_spec(double gamma, std::size_t n = 128) {
  return {.kind = StateKind::cubic_phase, .gamma = gamma, .dimension = n};
}

namespace detail {

inline QuantumState make_coherent(cplx beta, std::size_t n, const Tolerances& tol) {
  ComplexVector c(static_cast<Eigen::Index>(n));
  c(0) = std::exp(-0.5 * std::norm(beta));
  for (Eigen::Index k = 1; k < c.size(); ++k) c(k) = c(k - 1) * beta / std::sqrt(static_cast<double>(k));
  const double leakage = std::max(0.0, 1.0 - c.squaredNorm());
  return QuantumState::from_amplitudes(c, leakage, tol);
}

inline QuantumState make_thermal(double n_bar, std::size_t n, const Tolerances& tol) {
  ComplexMatrix rho = ComplexMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double ratio = n_bar / (n_bar + 1.0);
  double pk = 1.0 / (n_bar + 1.0);
  double kept = 0.0;
  for (Eigen::Index k = 0; k < rho.rows(); ++k) {
    rho(k, k) = pk;
    kept += pk;
    pk *= ratio;
  }
  rho /= kept;
  return QuantumState::from_density(std::move(rho), std::pow(ratio, static_cast<double>(n)), tol);
}

/// e^{i gamma q^3}|0>: the phase is applied pointwise to the vacuum
/// wavefunction and the result is projected onto the basis by trapezoid
/// overlaps.
inline QuantumState make_cubic(double gamma, const HermiteBasis& basis, const Tolerances& tol) {
  const PositionGrid& grid = basis.grid();
  const Eigen::Index p = static_cast<Eigen::Index>(grid.size());
  ComplexVector psi(p);
  const double norm0 = std::pow(std::numbers::pi, -0.25);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double x = grid[static_cast<std::size_t>(j)];
    const double w = (j == 0 || j + 1 == p) ? 0.5 : 1.0;
    psi(j) = w * norm0 * std::exp(-0.5 * x * x) * std::polar(1.0, gamma * x * x * x);
  }
  const ComplexVector c = (basis.values().cast<cplx>() * psi) * grid.spacing();
  const double leakage = std::max(0.0, 1.0 - c.squaredNorm());
  return QuantumState::from_amplitudes(c, leakage, tol);
}

inline QuantumState make_base(StateKind kind, const StateSpec& spec, const HermiteBasis& basis,
                              const Tolerances& tol) {
  const std::size_t n = basis.dimension();
  switch (kind) {
    case StateKind::vacuum: return make_coherent({0.0, 0.0}, n, tol);
    case StateKind::coherent: return make_coherent(spec.beta, n, tol);
    case StateKind::thermal: return make_thermal(spec.n_bar, n, tol);
    case StateKind::cubic_phase: return make_cubic(spec.gamma, basis, tol);
    case StateKind::displaced: break;
  }
  throw NumericalError(NumericalError::Kind::internal, "unexpected nested displaced state");
}

}  // namespace detail

/// Builds the state described by `spec` on the basis' Fock space.
inline QuantumState make_state(const StateSpec& spec, const HermiteBasis& basis,
                               const Tolerances& tol = {}) {
  spec.validate();
  if (spec.dimension != basis.dimension()) {
    throw ConfigError("state dimension " + std::to_string(spec.dimension) +
                      " does not match basis dimension " + std::to_string(basis.dimension()));
  }
  if (spec.kind == StateKind::displaced) {
    return displace(detail::make_base(spec.inner, spec, basis, tol), spec.alpha, tol);
  }
  return detail::make_base(spec.kind, spec, basis, tol);
}

}  // namespace nlsq

#endif
