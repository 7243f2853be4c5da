#include "nlsq/squeezing.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nlsq/estimate.hpp"
#include "nlsq/states.hpp"
#include "oracles.hpp"

using namespace nlsq;

namespace {
const HermiteBasis& basis128() {
  static const HermiteBasis b = build_basis(128, PositionGrid::for_dimension(128));
  return b;
}
MomentSet moments_of(const StateSpec& spec) { return exact_moment_set(make_state(spec, basis128())); }
const cplx kBetaAt01(0.0, 3.0 * 0.1 / (2.0 * std::numbers::sqrt2));
}  // namespace

TEST(NlsVariance, Vacuum) {
  const auto m = moments_of(vacuum_spec());
  EXPECT_NEAR(nls_variance(m, 0.0), 0.5, 1e-13);
  EXPECT_NEAR(nls_variance(m, 0.1), 0.545, 1e-13);
}

TEST(NlsVariance, CubicStateAtMatchedLambda) {
  EXPECT_NEAR(nls_variance(moments_of(cubic_spec(0.1)), 0.1), 0.5, 1e-6);
}

TEST(NlsVariance, OnlyCubicOrder) {
  const auto m = moments_of(vacuum_spec());
  try {
    nls_variance(m, 0.1, 4);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), NumericalError::Kind::unsupported_order);
  }
}

TEST(NlsVariance, MissingMomentsReported) {
  MomentSet m;
  m.set(phase::p, 1, {0.0, 0.0});
  try {
    nls_variance(m, 0.1);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), NumericalError::Kind::incomplete_moments);
  }
}

TEST(SecondMoment, CoherentAtOptimalBeta) {
  EXPECT_NEAR(second_moment(moments_of(coherent_spec(kBetaAt01)), 0.1), 0.545, 1e-10);
  EXPECT_NEAR(second_moment(moments_of(vacuum_spec()), 0.0), 0.5, 1e-13);
}

TEST(SecondMoment, MatchedDisplacementEquatesVarianceAndSecondMoment) {
  const double lambda = 0.1;
  const auto& b = basis128();
  const auto s = make_state(cubic_spec(0.1), b);
  const auto m = exact_moment_set(s);
  const double pbar = matched_displacement(m, lambda);
  const auto shifted = exact_moment_set(displace(s, cplx(0.0, pbar / std::numbers::sqrt2)));
  EXPECT_NEAR(second_moment(shifted, lambda), nls_variance(m, lambda), 1e-8);

  // Independent route: <(p - 3 l q^2)^2> on the dense displaced vector.
  const oracle::Dense dense(200);
  const oracle::Mat disp = (cplx(0.0, pbar / std::numbers::sqrt2) * dense.a.adjoint() -
                            std::conj(cplx(0.0, pbar / std::numbers::sqrt2)) * dense.a).exp();
  const oracle::Vec phi = disp * dense.cubic(0.1);
  const oracle::Mat op = dense.p - 3 * lambda * dense.q * dense.q;
  EXPECT_NEAR(oracle::Dense::expect(phi, op * op), 0.5, 1e-8);
}

TEST(MatchedDisplacement, Examples) {
  EXPECT_NEAR(matched_displacement(moments_of(vacuum_spec()), 0.1), 0.15, 1e-13);
  const auto coh = moments_of(coherent_spec({0.2, 0.5}));
  EXPECT_NEAR(matched_displacement(coh, 0.0), -coh.value(phase::p, 1), 1e-15);
  EXPECT_NEAR(matched_displacement(moments_of(cubic_spec(0.1)), 0.1), 0.0, 1e-8);
}

TEST(ClassicalThreshold, Values) {
  EXPECT_DOUBLE_EQ(classical_threshold(0.0), 0.5);
  EXPECT_NEAR(classical_threshold(0.1), 0.545, 1e-15);
  EXPECT_NEAR(classical_threshold(1.0 / 3.0), 1.0, 1e-15);
}

TEST(SqueezingMargin, Examples) {
  const auto cubic = squeezing_margin(moments_of(cubic_spec(0.1)), 0.1);
  EXPECT_NEAR(cubic.margin, 0.045, 1e-6);
  EXPECT_TRUE(cubic.nonclassical);
  for (double lambda : {-0.2, 0.0, 0.1, 0.3}) {
    const auto vac = squeezing_margin(moments_of(vacuum_spec()), lambda);
    EXPECT_NEAR(vac.margin, 0.0, 1e-12);
    EXPECT_FALSE(vac.nonclassical);
  }
  const auto th = squeezing_margin(moments_of(thermal_spec(1.0)), 0.0);
  EXPECT_NEAR(th.margin, -1.0, 1e-10);
  EXPECT_FALSE(th.nonclassical);
}

TEST(SqueezingMargin, KSigmaRuleOnEstimatedMoments) {
  MomentSet m(Provenance::estimated);
  m.set(phase::p, 1, {0.15, 0.001});
  m.set(phase::p, 2, {0.5675, 0.01});
  m.set(phase::q, 2, {0.5, 0.001});
  m.set(phase::q, 4, {0.75, 0.002});
  m.set_mixed({0.45, 0.002});
  const auto r = squeezing_margin(m, 0.1);
  EXPECT_NEAR(r.margin, 0.045, 1e-12);
  EXPECT_GT(r.sigma, 0.01);
  EXPECT_TRUE(r.nonclassical);
  m.set(phase::p, 2, {0.5675, 0.02});
  EXPECT_FALSE(squeezing_margin(m, 0.1).nonclassical);
  EXPECT_TRUE(squeezing_margin(m, 0.1, 2.0).nonclassical);
}

TEST(ResourceCondition, Examples) {
  EXPECT_TRUE(resource_condition(0.1, 0.1));
  EXPECT_FALSE(resource_condition(0.25, 0.1));
  EXPECT_TRUE(resource_condition(0.199, 0.1));
  EXPECT_FALSE(resource_condition(0.2001, 0.1));
  EXPECT_THROW(resource_condition(0.0, 0.1), NumericalError);
  EXPECT_THROW(resource_condition(0.1, -0.1), NumericalError);
}

TEST(Properties, MomentumDisplacementInvariance) {
  const auto& b = basis128();
  const std::vector<QuantumState> states = {make_state(vacuum_spec(), b), make_state(cubic_spec(0.1), b),
                                            make_state(coherent_spec({0.5, -0.3}), b),
                                            make_state(thermal_spec(0.5), b)};
  for (const auto& s : states) {
    const auto base = exact_moment_set(s);
    for (double pbar : {-2.0, -0.5, 0.5, 2.0}) {
      const auto shifted = exact_moment_set(displace(s, cplx(0.0, pbar / std::numbers::sqrt2)));
      for (double lambda : {-0.2, 0.0, 0.1, 0.3}) {
        EXPECT_NEAR(nls_variance(shifted, lambda), nls_variance(base, lambda), 1e-8);
      }
    }
  }
}

TEST(Properties, CoherentMixturesStayAboveThreshold) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto lambdas = linspace(-0.3, 0.3, 25);
  const auto& b = basis128();
  for (int trial = 0; trial < 25; ++trial) {
    const int k = 1 + int(unit(rng) * 4);
    std::vector<QuantumState> parts;
    std::vector<double> weights;
    for (int i = 0; i < k; ++i) {
      const double r = 2.0 * std::sqrt(unit(rng));
      parts.push_back(make_state(coherent_spec(std::polar(r, 2 * std::numbers::pi * unit(rng))), b));
      weights.push_back(unit(rng));
    }
    const auto m = exact_moment_set(mixture(parts, weights));
    for (double lambda : lambdas) EXPECT_GE(nls_variance(m, lambda) - classical_threshold(lambda), -1e-8);
  }
}

TEST(Properties, ParabolaIdentity) {
  for (const auto& spec : {vacuum_spec(), cubic_spec(0.2), thermal_spec(1.0), coherent_spec({0.7, 0.2})}) {
    const auto m = moments_of(spec);
    const auto curve = assemble_curve(m);
    for (double lambda : linspace(-0.3, 0.4, 29)) EXPECT_NEAR(curve(lambda), nls_variance(m, lambda), 1e-12);
    EXPECT_GE(curve.a2, 0.0);
  }
}

TEST(Properties, VacuumIsTheCoherentMinimizer) {
  // |beta| < 0.3 here, so a small Fock space is exact to double precision.
  const auto small = build_basis(24, PositionGrid::for_dimension(24));
  for (double lambda : {0.05, 0.1, 0.2}) {
    const double target = 3.0 * lambda / (2.0 * std::numbers::sqrt2);
    double best_im = 0.0;
    double best = 1e300;
    for (double im = target - 0.05; im <= target + 0.05; im += 1e-4) {
      const double v = second_moment(exact_moment_set(make_state(coherent_spec({0.0, im}, 24), small)), lambda);
      if (v < best) {
        best = v;
        best_im = im;
      }
    }
    EXPECT_NEAR(best_im, target, 1e-4);
  }
}
