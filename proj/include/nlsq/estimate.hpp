#ifndef NLSQ_ESTIMATE_HPP
#define NLSQ_ESTIMATE_HPP

// Method-of-moments reconstruction of the nonlinear-squeezing curve from
// homodyne records taken at the four channel phases 0, pi/2, +pi/4, -pi/4.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nlsq/errors.hpp"
#include "nlsq/hilbert.hpp"
#include "nlsq/parallel.hpp"
#include "nlsq/readout.hpp"
#include "nlsq/squeezing.hpp"

namespace nlsq {

/// Sample means of Y^n, n = 0..max_n, with plug-in standard errors.
struct EmpiricalMoments {
  std::vector<double> mean;
  std::vector<double> std_error;
  std::size_t count = 0;

  int max_order() const { return static_cast<int>(mean.size()) - 1; }
};

inline constexpr int kMaxEstimatedOrder = 4;
inline constexpr std::size_t kMinSampleCount = 100;

/// One pass over the samples accumulating sum (Y/s)^k for k <= 2 max_n, where
/// s is a power of two bounding |Y| so the rescaling is exact.
inline EmpiricalMoments empirical_moments(std::span<const double> samples, int max_n) {
  if (max_n < 1 || max_n > kMaxEstimatedOrder) {
    throw NumericalError(NumericalError::Kind::unsupported_order,
                         "empirical moments support orders 1.." + std::to_string(kMaxEstimatedOrder));
  }
  if (samples.size() < kMinSampleCount) {
    throw NumericalError(NumericalError::Kind::data,
                         "need at least " + std::to_string(kMinSampleCount) + " samples, got " +
                             std::to_string(samples.size()));
  }
  double peak = 0.0;
  for (double y : samples) {
    if (!std::isfinite(y)) throw NumericalError(NumericalError::Kind::data, "non-finite sample");
    peak = std::max(peak, std::abs(y));
  }
  int exponent = 0;
  if (peak > 0.0) std::frexp(peak, &exponent);
  const double scale = std::ldexp(1.0, exponent);
  const double inv_scale = 1.0 / scale;

  const int top = 2 * max_n;
  std::vector<double> sums(static_cast<std::size_t>(top) + 1, 0.0);
  for (double y : samples) {
    const double u = y * inv_scale;
    double power = 1.0;
    for (int k = 1; k <= top; ++k) {
      power *= u;
      sums[static_cast<std::size_t>(k)] += power;
    }
  }
  const double n = static_cast<double>(samples.size());
  EmpiricalMoments em;
  em.count = samples.size();
  em.mean.assign(static_cast<std::size_t>(max_n) + 1, 1.0);
  em.std_error.assign(static_cast<std::size_t>(max_n) + 1, 0.0);
  for (int k = 1; k <= max_n; ++k) {
    const double sk = std::pow(scale, k);
    const double mk = sums[static_cast<std::size_t>(k)] / n;
    const double m2k = sums[static_cast<std::size_t>(2 * k)] / n;
    em.mean[static_cast<std::size_t>(k)] = mk * sk;
    em.std_error[static_cast<std::size_t>(k)] = std::sqrt(std::max(0.0, m2k - mk * mk) / n) * sk;
  }
  return em;
}

/// Triangular solve of the output-moment hierarchy for <Q_phi^k>, k <= max
/// order of `em`. Index 0 of the result is the normalization {1, 0}.
///
/// Row n: <Y^n> = c_Q^n <Q^n> + sum_{k<n} C(n,k) c_Q^k <Q^k> W_{n-k}, where
/// W_j are the moments of the combined noise Y_in + c_E E. Errors are
/// propagated to first order, treating the inputs as independent.
inline std::vector<Moment> invert_hierarchy(const EmpiricalMoments& em, const ChannelCoefficients& c,
                                            double n_bar, double min_gain = 1e-6) {
  if (!(std::abs(c.c_Q) >= min_gain)) {
    throw NumericalError(NumericalError::Kind::ill_conditioned,
                         "|c_Q| = " + std::to_string(std::abs(c.c_Q)) + " below " + std::to_string(min_gain));
  }
  const int top = em.max_order();
  // noise[j] = <(Y_in + c_E E)^j>
  std::vector<double> noise(static_cast<std::size_t>(top) + 1, 0.0);
  for (int j = 0; j <= top; ++j) {
    for (int a = 0; a <= j; ++a) {
      noise[static_cast<std::size_t>(j)] += std::tgamma(j + 1.0) / (std::tgamma(a + 1.0) * std::tgamma(j - a + 1.0)) *
                                            vacuum_filtered_moment(a) * std::pow(c.c_E, j - a) *
                                            thermal_filtered_moment(j - a, n_bar);
    }
  }
  std::vector<Moment> q(static_cast<std::size_t>(top) + 1);
  q[0] = {1.0, 0.0};
  for (int n = 1; n <= top; ++n) {
    double residual = em.mean[static_cast<std::size_t>(n)];
    double var = std::pow(em.std_error[static_cast<std::size_t>(n)], 2);
    for (int k = 0; k < n; ++k) {
      const double binom = std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0));
      const double weight = binom * std::pow(c.c_Q, k) * noise[static_cast<std::size_t>(n - k)];
      residual -= weight * q[static_cast<std::size_t>(k)].value;
      var += std::pow(weight * q[static_cast<std::size_t>(k)].std_error, 2);
    }
    const double gain = std::pow(c.c_Q, n);
    q[static_cast<std::size_t>(n)] = {residual / gain, std::sqrt(var) / std::abs(gain)};
  }
  return q;
}

/// <p q^2 + q^2 p> = (2 sqrt2 / 3)(<Q_{pi/4}^3> - <Q_{-pi/4}^3>) - (2/3) <p^3>.
inline Moment mixed_moment_recovery(const MomentSet& m) {
  const Moment plus = m.at(phase::plus, 3);
  const Moment minus = m.at(phase::minus, 3);
  const Moment p3 = m.at(phase::p, 3);
  const double a = 2.0 * std::numbers::sqrt2 / 3.0;
  const double b = 2.0 / 3.0;
  Moment out;
  out.value = a * (plus.value - minus.value) - b * p3.value;
  out.std_error = std::sqrt(a * a * (plus.std_error * plus.std_error + minus.std_error * minus.std_error) +
                            b * b * p3.std_error * p3.std_error);
  return out;
}

/// Parabola coefficients of V(lambda) with first-order covariance.
/// The mixed moment is recovered from the rotated quadratures when absent.
inline NlsCurve assemble_curve(const MomentSet& m) {
  const Moment p1 = m.at(phase::p, 1);
  const Moment p2 = m.at(phase::p, 2);
  const Moment q2 = m.at(phase::q, 2);
  const Moment q4 = m.at(phase::q, 4);
  const Moment mixed = m.mixed() ? *m.mixed() : mixed_moment_recovery(m);

  NlsCurve curve;
  curve.a0 = p2.value - p1.value * p1.value;
  curve.a1 = -3.0 * (mixed.value - 2.0 * p1.value * q2.value);
  curve.a2 = 9.0 * (q4.value - q2.value * q2.value);

  // Columns: p1, p2, q2, q4, mixed.
  Eigen::Matrix<double, 3, 5> jac;
  jac << -2.0 * p1.value, 1.0, 0.0, 0.0, 0.0,
         6.0 * q2.value, 0.0, 6.0 * p1.value, 0.0, -3.0,
         0.0, 0.0, -18.0 * q2.value, 9.0, 0.0;
  Eigen::Matrix<double, 5, 1> var;
  var << p1.std_error * p1.std_error, p2.std_error * p2.std_error, q2.std_error * q2.std_error,
      q4.std_error * q4.std_error, mixed.std_error * mixed.std_error;
  curve.covariance = jac * var.asDiagonal() * jac.transpose();
  return curve;
}

struct Reconstruction {
  MomentSet moments{Provenance::estimated};
  NlsCurve curve;
};

/// Channel phases in acquisition order and the highest order inverted at each.
inline constexpr std::array<double, 4> kReadoutPhases{phase::q, phase::p, phase::plus, phase::minus};
inline constexpr std::array<int, 4> kReadoutOrders{4, 3, 3, 3};

/// Inverts the per-phase output moments (ordered as kReadoutPhases) and
/// assembles the curve.
inline Reconstruction reconstruct_from_output(std::span<const EmpiricalMoments, 4> outputs,
                                              const ChannelCoefficients& c, double n_bar,
                                              Provenance provenance = Provenance::estimated) {
  Reconstruction r{MomentSet(provenance), {}};
  for (std::size_t i = 0; i < kReadoutPhases.size(); ++i) {
    const auto q = invert_hierarchy(outputs[i], c, n_bar);
    for (int k = 1; k < static_cast<int>(q.size()); ++k) r.moments.set(kReadoutPhases[i], k, q[static_cast<std::size_t>(k)]);
  }
  r.moments.set_mixed(mixed_moment_recovery(r.moments));
  r.curve = assemble_curve(r.moments);
  return r;
}

/// Holds one sampler per readout phase so repeated reconstructions of the
/// same state reuse the marginals.
class Reconstructor {
 public:
  Reconstructor(const QuantumState& state, const HermiteBasis& basis, ChannelParams params,
                const Tolerances& tol = {})
      : params_(params), coeffs_(channel_coefficients(params)) {
    samplers_.reserve(kReadoutPhases.size());
    for (double phi : kReadoutPhases) {
      samplers_.emplace_back(marginal_density(state, phi, basis, tol), coeffs_, params.n_bar);
    }
  }

  const ChannelParams& params() const { return params_; }
  const ChannelCoefficients& coefficients() const { return coeffs_; }

  /// One reconstruction: `count` samples per phase, phase i seeded with
  /// derive_seed(seed, i).
  Reconstruction run(std::size_t count, std::uint64_t seed, unsigned threads = 1) const {
    std::array<EmpiricalMoments, 4> outputs;
    for (std::size_t i = 0; i < samplers_.size(); ++i) {
      const auto samples = samplers_[i].sample(count, derive_seed(seed, i), threads);
      outputs[i] = empirical_moments(samples, kReadoutOrders[i]);
    }
    return reconstruct_from_output(std::span<const EmpiricalMoments, 4>(outputs), coeffs_, params_.n_bar);
  }

 private:
  ChannelParams params_;
  ChannelCoefficients coeffs_;
  std::vector<HomodyneSampler> samplers_;
};

inline Reconstruction run_reconstruction(const QuantumState& state, const HermiteBasis& basis,
                                         const ChannelParams& params, std::size_t count, std::uint64_t seed,
                                         unsigned threads = 1) {
  return Reconstructor(state, basis, params).run(count, seed, threads);
}

// ---------------------------------------------------------------------------
// Ensembles

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and sample standard deviation (R - 1 denominator).
inline Stat summarize(std::span<const double> xs) {
  Stat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return s;
  double acc = 0.0;
  for (double x : xs) acc += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  return s;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t points) {
  std::vector<double> out(points);
  if (points == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < points; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(points - 1);
    out[i] = (1.0 - t) * lo + t * hi;
  }
  return out;
}

inline std::vector<double> default_lambda_grid() { return linspace(-0.2, 0.4, 101); }

struct MomentStat {
  double phase;
  int order;
  Stat stat;
};

struct EnsembleReport {
  ChannelParams params;
  ChannelCoefficients coefficients;
  std::size_t count = 0;
  std::uint64_t base_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> lambdas;
  std::vector<Stat> v;                         // per lambda
  std::array<Stat, 3> curve_coefficients{};    // a0, a1, a2
  std::vector<MomentStat> moments;
  Stat mixed;
  std::vector<std::array<double, 3>> replicate_coefficients;

  std::size_t replicates() const { return seeds.size(); }
};

/// Pointwise statistics of the reconstructed curves over the lambda grid.
inline EnsembleReport summarize_ensemble(const Reconstructor& rec, std::span<const Reconstruction> runs,
                                         std::span<const std::uint64_t> seeds, std::uint64_t base_seed,
                                         std::size_t count, std::span<const double> lambdas) {
  EnsembleReport report;
  report.params = rec.params();
  report.coefficients = rec.coefficients();
  report.count = count;
  report.base_seed = base_seed;
  report.seeds.assign(seeds.begin(), seeds.end());
  report.lambdas.assign(lambdas.begin(), lambdas.end());

  std::vector<double> column(runs.size());
  for (double lambda : lambdas) {
    for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r].curve(lambda);
    report.v.push_back(summarize(column));
  }
  const auto coef = [](const NlsCurve& c, int i) { return i == 0 ? c.a0 : i == 1 ? c.a1 : c.a2; };
  for (int i = 0; i < 3; ++i) {
    for (std::size_t r = 0; r < runs.size(); ++r) column[r] = coef(runs[r].curve, i);
    report.curve_coefficients[static_cast<std::size_t>(i)] = summarize(column);
  }
  for (const auto& run : runs) report.replicate_coefficients.push_back({run.curve.a0, run.curve.a1, run.curve.a2});
  if (!runs.empty()) {
    for (const auto& e : runs.front().moments.entries()) {
      for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r].moments.value(e.phase, e.order);
      report.moments.push_back({e.phase, e.order, summarize(column)});
    }
    for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r].moments.mixed_or_throw().value;
    report.mixed = summarize(column);
  }
  return report;
}

/// R independent reconstructions; replicate r uses derive_seed(base_seed, r).
inline EnsembleReport ensemble_run(const QuantumState& state, const HermiteBasis& basis,
                                   const ChannelParams& params, std::size_t count, std::size_t replicates,
                                   std::uint64_t base_seed, std::span<const double> lambdas,
                                   unsigned threads = 0) {
  if (replicates < 2) throw ConfigError("an ensemble needs at least 2 replicates");
  const Reconstructor rec(state, basis, params);
  std::vector<std::uint64_t> seeds(replicates);
  for (std::size_t r = 0; r < replicates; ++r) seeds[r] = derive_seed(base_seed, r);
  std::vector<Reconstruction> runs(replicates);
  parallel_for(replicates, threads, [&](std::size_t r) { runs[r] = rec.run(count, seeds[r]); });
  return summarize_ensemble(rec, runs, seeds, base_seed, count, lambdas);
}

}  // namespace nlsq

#endif
