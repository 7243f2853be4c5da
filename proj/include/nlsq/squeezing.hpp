#ifndef NLSQ_SQUEEZING_HPP
#define NLSQ_SQUEEZING_HPP

// Cubic nonlinear squeezing
//
//   V(lambda)  = Var(p - 3 lambda q^2)
//   V2(lambda) = <(p - 3 lambda q^2)^2>
//
// and the classical bound 1/2 (1 + 9 lambda^2) shared by the vacuum and by
// every mixture of coherent states.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nlsq/errors.hpp"
#include "nlsq/hilbert.hpp"

namespace nlsq {

namespace phase {
inline constexpr double q = 0.0;
inline constexpr double p = std::numbers::pi / 2;
inline constexpr double plus = std::numbers::pi / 4;
inline constexpr double minus = -std::numbers::pi / 4;
}  // namespace phase

struct Moment {
  double value = 0.0;
  double std_error = 0.0;
};

enum class Provenance { exact, estimated };

/// Quadrature moments <Q_phi^n> keyed by (phi, n), plus the symmetrized mixed
/// moment <p q^2 + q^2 p> once it is known.
class MomentSet {
 public:
  struct Entry {
    double phase;
    int order;
    Moment moment;
  };

  explicit MomentSet(Provenance provenance = Provenance::exact) : provenance_(provenance) {}

  Provenance provenance() const { return provenance_; }

  void set(double phi, int order, Moment m) {
    for (auto& e : entries_) {
      if (same_phase(e.phase, phi) && e.order == order) {
        e.moment = m;
        return;
      }
    }
    entries_.push_back({phi, order, m});
  }

  std::optional<Moment> find(double phi, int order) const {
    for (const auto& e : entries_) {
      if (same_phase(e.phase, phi) && e.order == order) return e.moment;
    }
    return std::nullopt;
  }

  Moment at(double phi, int order) const {
    if (auto m = find(phi, order)) return *m;
    throw NumericalError(NumericalError::Kind::incomplete_moments,
                         "missing moment <Q_phi^" + std::to_string(order) + "> at phi=" +
                             std::to_string(phi));
  }

  double value(double phi, int order) const { return at(phi, order).value; }

  void set_mixed(Moment m) { mixed_ = m; }
  const std::optional<Moment>& mixed() const { return mixed_; }
  Moment mixed_or_throw() const {
    if (!mixed_) {
      throw NumericalError(NumericalError::Kind::incomplete_moments,
                           "missing mixed moment <pq^2 + q^2 p>");
    }
    return *mixed_;
  }

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  static bool same_phase(double a, double b) {
    return std::abs(std::remainder(a - b, 2.0 * std::numbers::pi)) < 1e-12;
  }

  Provenance provenance_;
  std::vector<Entry> entries_;
  std::optional<Moment> mixed_;
};

/// Every moment the cubic curve needs, computed exactly from a state.
inline MomentSet exact_moment_set(const QuantumState& state, const Tolerances& tol = {}) {
  MomentSet m(Provenance::exact);
  const auto put = [&](double phi, int n) { m.set(phi, n, {quadrature_moment(state, phi, n, tol), 0.0}); };
  for (int n = 1; n <= 4; ++n) put(phase::q, n);
  for (int n = 1; n <= 4; ++n) put(phase::p, n);
  for (int n = 1; n <= 3; ++n) put(phase::plus, n);
  for (int n = 1; n <= 3; ++n) put(phase::minus, n);
  m.set_mixed({symmetrized_pq2(state, tol), 0.0});
  return m;
}

/// Parabola V(lambda) = a0 + a1 lambda + a2 lambda^2 with the first-order
/// covariance of its coefficients.
struct NlsCurve {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();

  double operator()(double lambda) const { return a0 + lambda * (a1 + lambda * a2); }

  double std_error(double lambda) const {
    const Eigen::Vector3d g(1.0, lambda, lambda * lambda);
    return std::sqrt(std::max(0.0, g.dot(covariance * g)));
  }

  std::array<double, 3> coefficient_errors() const {
    return {std::sqrt(covariance(0, 0)), std::sqrt(covariance(1, 1)), std::sqrt(covariance(2, 2))};
  }
};

namespace detail {
inline void require_cubic(int order) {
  if (order != 3) {
    throw NumericalError(NumericalError::Kind::unsupported_order,
                         "only the cubic nonlinearity (n=3) is implemented, got n=" +
                             std::to_string(order));
  }
}
}  // namespace detail

/// V[rho](lambda) evaluated directly from the moment expansion.
inline double nls_variance(const MomentSet& m, double lambda, int order = 3) {
  detail::require_cubic(order);
  const double p1 = m.value(phase::p, 1);
  const double p2 = m.value(phase::p, 2);
  const double q2 = m.value(phase::q, 2);
  const double q4 = m.value(phase::q, 4);
  const double mixed = m.mixed_or_throw().value;
  const double second = p2 - 3.0 * lambda * mixed + 9.0 * lambda * lambda * q4;
  const double mean = p1 - 3.0 * lambda * q2;
  return second - mean * mean;
}

/// V2[rho](lambda) = <(p - 3 lambda q^2)^2>, no mean subtraction.
inline double second_moment(const MomentSet& m, double lambda, int order = 3) {
  detail::require_cubic(order);
  const double p2 = m.value(phase::p, 2);
  const double q4 = m.value(phase::q, 4);
  const double mixed = m.mixed_or_throw().value;
  return p2 - 3.0 * lambda * mixed + 9.0 * lambda * lambda * q4;
}

/// Momentum shift that makes <p> = 3 lambda <q^2>; after it V2 equals V.
inline double matched_displacement(const MomentSet& m, double lambda) {
  return 3.0 * lambda * m.value(phase::q, 2) - m.value(phase::p, 1);
}

/// Nonlinear squeezing of the vacuum, which is also the bound for every
/// classical (coherent-mixture) state.
inline constexpr double classical_threshold(double lambda) { return 0.5 * (1.0 + 9.0 * lambda * lambda); }

/// First-order standard error of V(lambda) from independent moment errors.
inline double nls_variance_error(const MomentSet& m, double lambda) {
  const Moment p1 = m.at(phase::p, 1);
  const Moment p2 = m.at(phase::p, 2);
  const Moment q2 = m.at(phase::q, 2);
  const Moment q4 = m.at(phase::q, 4);
  const Moment mixed = m.mixed_or_throw();
  const double mean = p1.value - 3.0 * lambda * q2.value;
  const double terms[] = {
      p2.std_error,
      -2.0 * mean * p1.std_error,
      -3.0 * lambda * mixed.std_error,
      6.0 * lambda * mean * q2.std_error,
      9.0 * lambda * lambda * q4.std_error,
  };
  double acc = 0.0;
  for (double t : terms) acc += t * t;
  return std::sqrt(acc);
}

struct SqueezingMargin {
  double margin = 0.0;
  double sigma = 0.0;
  bool nonclassical = false;
};

/// Distance below the classical bound. The verdict requires the margin to
/// exceed k sigma, and at least `floor` so exact round-off never certifies.
inline SqueezingMargin squeezing_margin(const MomentSet& m, double lambda, double k_sigma = 3.0,
                                        double floor = 1e-9) {
  SqueezingMargin out;
  out.margin = classical_threshold(lambda) - nls_variance(m, lambda);
  out.sigma = m.provenance() == Provenance::exact ? 0.0 : nls_variance_error(m, lambda);
  out.nonclassical = out.margin > std::max(k_sigma * out.sigma, floor);
  return out;
}

/// Whether |gamma> beats the vacuum as an ancilla for e^{i gamma_G q^3}.
inline bool resource_condition(double gamma, double gamma_g) {
  if (!(gamma > 0.0) || !(gamma_g > 0.0)) {
    throw NumericalError(NumericalError::Kind::domain, "resource condition needs gamma, gamma_G > 0");
  }
  const double d = gamma - gamma_g;
  return 0.5 * (1.0 + 9.0 * d * d) < classical_threshold(gamma_g);
}

}  // namespace nlsq

#endif
