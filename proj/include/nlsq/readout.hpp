#ifndef NLSQ_READOUT_HPP
#define NLSQ_READOUT_HPP

// Forward model of the QND readout. After adiabatic elimination of the
// cavity and filtering with the rectangular temporal mode 1/sqrt(tau), the
// detected output quadrature is
//
//   Y_out = Y_in + c_Q Q_phi(0) + c_E E
//
// with Y_in a vacuum quadrature (variance 1/2), E a filtered thermal
// quadrature (variance n_bar + 1/2), and Q_phi(0) the mechanical quadrature
// at the start of the interaction. All three are independent.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "nlsq/errors.hpp"
#include "nlsq/hilbert.hpp"
#include "nlsq/parallel.hpp"
#include "nlsq/squeezing.hpp"

namespace nlsq {

/// Readout parameters in units where kappa sets the frequency scale.
struct ChannelParams {
  double G = 0.1;
  double kappa = 1.0;
  double Gamma_m = 0.0;
  double n_bar = 0.0;
  double tau = 1000.0;
  double phi = 0.0;

  void validate() const {
    const double values[] = {G, kappa, Gamma_m, n_bar, tau, phi};
    for (double v : values) {
      if (!std::isfinite(v)) throw ConfigError("channel parameters must be finite");
    }
    if (G < 0.0 || kappa <= 0.0 || Gamma_m < 0.0 || n_bar < 0.0) {
      throw ConfigError("channel rates must be nonnegative and kappa positive");
    }
    if (!(tau > 0.0)) throw ConfigError("interaction time tau must be positive");
  }

  /// kappa dominates: kappa tau >> 1 and G <= kappa.
  bool adiabatic() const { return kappa * tau >= 10.0 && G <= kappa; }

  double thermalisation_rate() const { return n_bar * Gamma_m; }

  double cooperativity() const { return G * G / (n_bar * Gamma_m * kappa); }
};

enum class ExpansionOrder { exact, first_order };

struct ChannelCoefficients {
  double c_Q = 0.0;
  double c_E = 0.0;
  ExpansionOrder order = ExpansionOrder::exact;
};

namespace detail {

/// (Gamma tau + 4 e^{-Gamma tau/2} - e^{-Gamma tau} - 3) / (Gamma tau)^3.
/// The numerator cancels to O(x^3), so small x uses its Taylor series.
inline double thermal_radicand_ratio(double x) {
  if (x < 1.0) {
    // sum_{k>=3} [4 (-1/2)^k - (-1)^k] x^{k-3} / k!
    double acc = 0.0;
    double fact = 6.0;        // k!
    double half_pow = -0.125; // (-1/2)^k
    double sign = -1.0;       // (-1)^k
    double xp = 1.0;
    for (int k = 3; k < 30; ++k) {
      const double term = (4.0 * half_pow - sign) * xp / fact;
      acc += term;
      if (std::abs(term) < 1e-18 * std::abs(acc)) break;
      fact *= static_cast<double>(k + 1);
      half_pow *= -0.5;
      sign = -sign;
      xp *= x;
    }
    return acc;
  }
  return (x + 4.0 * std::exp(-0.5 * x) - std::exp(-x) - 3.0) / (x * x * x);
}

}  // namespace detail

/// c_Q and c_E of the filtered output, either exact in Gamma_m tau or
/// expanded to first order.
inline ChannelCoefficients channel_coefficients(const ChannelParams& p,
                                                ExpansionOrder order = ExpansionOrder::exact) {
  p.validate();
  const double x = p.Gamma_m * p.tau;
  const double c_q0 = -2.0 * p.G * std::sqrt(2.0 * p.tau / p.kappa);
  ChannelCoefficients c;
  c.order = order;
  if (order == ExpansionOrder::first_order) {
    c.c_Q = c_q0 + 0.5 * p.G * std::sqrt(2.0 * p.tau * p.tau * p.tau / p.kappa) * p.Gamma_m;
    c.c_E = -2.0 * p.G * p.tau * std::sqrt(2.0 * p.Gamma_m / (3.0 * p.kappa));
    return c;
  }
  // -(4G/Gamma) sqrt(2/(kappa tau)) (1 - e^{-x/2}) = c_Q0 * (1 - e^{-x/2}) / (x/2)
  c.c_Q = x > 0.0 ? c_q0 * (-std::expm1(-0.5 * x)) / (0.5 * x) : c_q0;
  // -4G sqrt(2 (x + 4e^{-x/2} - e^{-x} - 3) / (kappa tau Gamma^2))
  //   = -4G sqrt(2 Gamma tau^2 r(x) / kappa),  r = radicand / x^3
  const double r = detail::thermal_radicand_ratio(x);
  if (r < 0.0) {
    throw NumericalError(NumericalError::Kind::internal,
                         "negative thermal radicand at Gamma_m tau = " + std::to_string(x));
  }
  c.c_E = -4.0 * p.G * std::sqrt(2.0 * p.Gamma_m * p.tau * p.tau * r / p.kappa);
  return c;
}

/// k-th moment of the filtered vacuum input quadrature (Gaussian, variance 1/2).
inline double vacuum_filtered_moment(int k) {
  if (k < 0) throw NumericalError(NumericalError::Kind::domain, "negative moment order");
  if (k % 2 == 1) return 0.0;
  double double_fact = 1.0;
  for (int j = k - 1; j > 1; j -= 2) double_fact *= j;
  return std::ldexp(double_fact, -k / 2);
}

/// k-th moment of the filtered thermal quadrature E: (n+1/2)^{k/2} (k-1)!!.
inline double thermal_filtered_moment(int k, double n_bar) {
  if (k < 0 || n_bar < 0.0) throw NumericalError(NumericalError::Kind::domain, "invalid thermal moment");
  if (k % 2 == 1) return 0.0;
  double double_fact = 1.0;
  for (int j = k - 1; j > 1; j -= 2) double_fact *= j;
  return std::pow(n_bar + 0.5, 0.5 * k) * double_fact;
}

/// Raw moments <Y_out^n>, n = 0..max_n, from the mechanical moments
/// mech[k] = <Q_phi^k> (mech[0] = 1). The three independent contributions are
/// combined by two successive binomial convolutions.
inline std::vector<double> forward_output_moments(std::span<const double> mech,
                                                  const ChannelCoefficients& c, double n_bar,
                                                  int max_n) {
  if (max_n < 0 || static_cast<int>(mech.size()) < max_n + 1) {
    throw NumericalError(NumericalError::Kind::incomplete_moments,
                         "forward model needs mechanical moments up to order " + std::to_string(max_n));
  }
  const auto n = static_cast<std::size_t>(max_n);
  std::vector<double> binom((n + 1) * (n + 1), 0.0);
  auto choose = [&](std::size_t a, std::size_t b) -> double& { return binom[a * (n + 1) + b]; };
  for (std::size_t a = 0; a <= n; ++a) {
    choose(a, 0) = 1.0;
    for (std::size_t b = 1; b <= a; ++b) choose(a, b) = choose(a - 1, b - 1) + (b < a ? choose(a - 1, b) : 0.0);
  }
  auto convolve = [&](const std::vector<double>& u, const std::vector<double>& v) {
    std::vector<double> out(n + 1, 0.0);
    for (std::size_t m = 0; m <= n; ++m) {
      for (std::size_t k = 0; k <= m; ++k) out[m] += choose(m, k) * u[k] * v[m - k];
    }
    return out;
  };
  std::vector<double> signal(n + 1), vac(n + 1), thermal(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const int ki = static_cast<int>(k);
    signal[k] = std::pow(c.c_Q, ki) * (k == 0 ? 1.0 : mech[k]);
    vac[k] = vacuum_filtered_moment(ki);
    thermal[k] = std::pow(c.c_E, ki) * thermal_filtered_moment(ki, n_bar);
  }
  return convolve(convolve(vac, signal), thermal);
}

/// Same, reading <Q_phi^k> at the channel phase from a moment set.
inline std::vector<double> forward_output_moments(const MomentSet& mech, const ChannelParams& p,
                                                  const ChannelCoefficients& c, int max_n) {
  std::vector<double> q(static_cast<std::size_t>(max_n) + 1, 1.0);
  for (int k = 1; k <= max_n; ++k) q[static_cast<std::size_t>(k)] = mech.value(p.phi, k);
  return forward_output_moments(q, c, p.n_bar, max_n);
}

// ---------------------------------------------------------------------------
// Sampling

/// Seed for stream `index` derived from `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

/// Homodyne record generator for one state and one channel phase.
///
/// Q_phi(0) is drawn by inverse-CDF from the gridded marginal (cumulative
/// trapezoid, linear interpolation). The stream is split into fixed-size
/// blocks with independent generators, so the output does not depend on how
/// blocks are scheduled across threads.
class HomodyneSampler {
 public:
  static constexpr std::size_t kBlockSize = 1u << 16;

  HomodyneSampler(const MarginalDensity& marginal, const ChannelCoefficients& coeffs, double n_bar)
      : x_(marginal.x), coeffs_(coeffs), thermal_sd_(std::sqrt(n_bar + 0.5)) {
    const std::size_t n = x_.size();
    if (n < 2 || marginal.density.size() != n) {
      throw NumericalError(NumericalError::Kind::sampling, "marginal needs at least two grid points");
    }
    cdf_.assign(n, 0.0);
    for (std::size_t j = 1; j < n; ++j) {
      cdf_[j] = cdf_[j - 1] + 0.5 * (marginal.density[j - 1] + marginal.density[j]) * marginal.spacing;
    }
    const double total = cdf_.back();
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw NumericalError(NumericalError::Kind::sampling, "degenerate marginal density");
    }
    for (double& v : cdf_) v /= total;
    cdf_.back() = 1.0;
  }

  /// Q_phi(0) sample for a uniform variate u in [0, 1).
  double quadrature(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    const std::size_t lo = hi - 1;
    const double width = cdf_[hi] - cdf_[lo];
    const double t = width > 0.0 ? (u - cdf_[lo]) / width : 0.5;
    return x_[lo] + t * (x_[hi] - x_[lo]);
  }

  void fill_block(std::uint64_t seed, std::size_t block, std::span<double> out) const {
    std::mt19937_64 rng(derive_seed(seed, block));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> input(0.0, std::numbers::sqrt2 / 2.0);
    std::normal_distribution<double> thermal(0.0, thermal_sd_);
    for (double& y : out) {
      const double q = quadrature(uniform(rng));
      const double yin = input(rng);
      const double e = thermal(rng);
      y = yin + coeffs_.c_Q * q + coeffs_.c_E * e;
    }
  }

  std::vector<double> sample(std::size_t count, std::uint64_t seed, unsigned threads = 1) const {
    if (count < 1) throw NumericalError(NumericalError::Kind::sampling, "sample count must be >= 1");
    std::vector<double> out(count);
    const std::size_t blocks = (count + kBlockSize - 1) / kBlockSize;
    parallel_for(blocks, threads, [&](std::size_t b) {
      const std::size_t begin = b * kBlockSize;
      const std::size_t len = std::min(kBlockSize, count - begin);
      fill_block(seed, b, std::span<double>(out).subspan(begin, len));
    });
    return out;
  }

 private:
  std::vector<double> x_;
  std::vector<double> cdf_;
  ChannelCoefficients coeffs_;
  double thermal_sd_;
};

inline std::vector<double> sample_homodyne(const QuantumState& state, const HermiteBasis& basis,
                                           const ChannelParams& p, std::size_t count, std::uint64_t seed,
                                           unsigned threads = 1, const Tolerances& tol = {}) {
  const auto coeffs = channel_coefficients(p);
  const HomodyneSampler sampler(marginal_density(state, p.phi, basis, tol), coeffs, p.n_bar);
  return sampler.sample(count, seed, threads);
}

}  // namespace nlsq

#endif
