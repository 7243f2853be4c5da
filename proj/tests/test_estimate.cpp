#include "nlsq/estimate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nlsq/states.hpp"

using namespace nlsq;

namespace {

const HermiteBasis& basis128() {
  static const HermiteBasis b = build_basis(128, PositionGrid::for_dimension(128));
  return b;
}

ChannelParams clean_channel() {
  return {.G = 0.1, .kappa = 1.0, .Gamma_m = 1e-9, .n_bar = 1e4, .tau = 1000.0, .phi = 0.0};
}

/// Noise-free output moments at every readout phase, from the exact state.
std::array<EmpiricalMoments, 4> exact_outputs(const QuantumState& s, const ChannelParams& p) {
  const auto exact = exact_moment_set(s);
  const auto c = channel_coefficients(p);
  std::array<EmpiricalMoments, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    ChannelParams pi = p;
    pi.phi = kReadoutPhases[i];
    out[i].mean = forward_output_moments(exact, pi, c, kReadoutOrders[i]);
    out[i].std_error.assign(out[i].mean.size(), 0.0);
    out[i].count = 1;
  }
  return out;
}

}  // namespace

TEST(EmpiricalMoments, ConstantSamples) {
  const std::vector<double> ys(1000, -1.5);
  const auto em = empirical_moments(ys, 4);
  for (int k = 1; k <= 4; ++k) {
    EXPECT_DOUBLE_EQ(em.mean[k], std::pow(-1.5, k));
    EXPECT_NEAR(em.std_error[k], 0.0, 1e-12);
  }
  EXPECT_EQ(em.count, 1000u);
  EXPECT_EQ(em.max_order(), 4);
}

TEST(EmpiricalMoments, NormalSamples) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(0.0, 3.0);
  std::vector<double> ys(400'000);
  for (double& y : ys) y = d(rng);
  const auto em = empirical_moments(ys, 4);
  EXPECT_NEAR(em.mean[1], 0.0, 4 * em.std_error[1]);
  EXPECT_NEAR(em.mean[2], 9.0, 4 * em.std_error[2]);
  EXPECT_NEAR(em.mean[4], 243.0, 4 * em.std_error[4]);
  EXPECT_NEAR(em.std_error[1], 3.0 / std::sqrt(4e5), 1e-4);
  EXPECT_NEAR(em.std_error[2], 9.0 * std::sqrt(2.0 / 4e5), 1e-3);
}

TEST(EmpiricalMoments, RejectsBadInput) {
  std::vector<double> ys(50, 0.1);
  EXPECT_THROW(empirical_moments(ys, 2), NumericalError);
  ys.assign(200, 0.1);
  EXPECT_THROW(empirical_moments(ys, 5), NumericalError);
  ys[17] = std::nan("");
  try {
    empirical_moments(ys, 2);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), NumericalError::Kind::data);
  }
}

TEST(InvertHierarchy, MomentumMeanExample) {
  EmpiricalMoments em{{1.0, -1.3416408}, {0.0, 0.0}, 1};
  const auto q = invert_hierarchy(em, ChannelCoefficients{-8.944272, -5.164e-3}, 1e4);
  EXPECT_NEAR(q[1].value, 0.15, 1e-7);
}

TEST(InvertHierarchy, RoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const ChannelCoefficients c{-(0.5 + 10 * std::abs(u(rng))), -std::abs(u(rng)) * 0.1};
    const double n_bar = 50 * std::abs(u(rng));
    std::vector<double> mech{1.0, u(rng), 1.0 + u(rng), u(rng), 3.0 + u(rng)};
    EmpiricalMoments em{forward_output_moments(mech, c, n_bar, 4), std::vector<double>(5, 0.0), 1};
    const auto q = invert_hierarchy(em, c, n_bar);
    for (int k = 1; k <= 4; ++k) EXPECT_NEAR(q[k].value, mech[k], 1e-10 * std::max(1.0, std::abs(mech[k])));
  }
}

TEST(InvertHierarchy, ErrorPropagationFirstOrder) {
  const ChannelCoefficients c{-2.0, 0.0};
  EmpiricalMoments em{{1.0, 0.2, 3.0}, {0.0, 0.01, 0.05}, 1000};
  const auto q = invert_hierarchy(em, c, 0.0);
  EXPECT_NEAR(q[1].std_error, 0.005, 1e-15);
  // Row 2: <Y^2> = 4<Q^2> + 1/2, independent of <Q>.
  EXPECT_NEAR(q[2].std_error, 0.05 / 4.0, 1e-15);
}

TEST(InvertHierarchy, IllConditionedGain) {
  EmpiricalMoments em{{1.0, 0.0}, {0.0, 0.0}, 1};
  try {
    invert_hierarchy(em, ChannelCoefficients{0.0, -0.1}, 1.0);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), NumericalError::Kind::ill_conditioned);
  }
}

TEST(MixedMomentRecovery, ExactStates) {
  const auto& b = basis128();
  EXPECT_NEAR(mixed_moment_recovery(exact_moment_set(make_state(vacuum_spec(), b))).value, 0.0, 1e-12);
  const auto cubic = exact_moment_set(make_state(cubic_spec(0.1), b));
  EXPECT_NEAR(mixed_moment_recovery(cubic).value, 0.45, 1e-9);
  EXPECT_NEAR(mixed_moment_recovery(cubic).value, cubic.mixed()->value, 1e-9);
  const auto coh = exact_moment_set(make_state(coherent_spec({0.3, 0.4}), b));
  EXPECT_NEAR(mixed_moment_recovery(coh).value, coh.mixed()->value, 1e-9);
}

TEST(MixedMomentRecovery, MissingRotatedQuadrature) {
  MomentSet m(Provenance::estimated);
  m.set(phase::p, 3, {0.0, 0.0});
  m.set(phase::plus, 3, {0.0, 0.0});
  try {
    mixed_moment_recovery(m);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), NumericalError::Kind::incomplete_moments);
  }
}

TEST(AssembleCurve, Examples) {
  const auto& b = basis128();
  auto vac = exact_moment_set(make_state(vacuum_spec(), b));
  const auto v = assemble_curve(vac);
  EXPECT_NEAR(v.a0, 0.5, 1e-12);
  EXPECT_NEAR(v.a1, 0.0, 1e-12);
  EXPECT_NEAR(v.a2, 4.5, 1e-12);
  EXPECT_EQ(v.covariance.norm(), 0.0);

  const auto c = assemble_curve(exact_moment_set(make_state(cubic_spec(0.1), b)));
  EXPECT_NEAR(c.a0, 0.545, 1e-9);
  EXPECT_NEAR(c.a1, -0.9, 1e-9);
  EXPECT_NEAR(c.a2, 4.5, 1e-9);

  const auto t = assemble_curve(exact_moment_set(make_state(thermal_spec(1.0), b)));
  EXPECT_NEAR(t.a0, 1.5, 1e-9);
  EXPECT_NEAR(t.a1, 0.0, 1e-9);
  EXPECT_NEAR(t.a2, 9.0 * (6.75 - 2.25), 1e-8);
}

TEST(AssembleCurve, AgreesWithDirectVariance) {
  const auto m = exact_moment_set(make_state(cubic_spec(-0.2), basis128()));
  const auto curve = assemble_curve(m);
  for (double lambda = -0.5; lambda <= 0.5; lambda += 0.05) {
    EXPECT_NEAR(curve(lambda), nls_variance(m, lambda), 1e-10);
  }
}

TEST(ReconstructFromOutput, NoiselessRoundTrip) {
  const auto& b = basis128();
  for (const auto& s : {make_state(cubic_spec(0.1), b), make_state(coherent_spec({0.5, -0.2}), b),
                        make_state(thermal_spec(0.5), b)}) {
    const auto outputs = exact_outputs(s, clean_channel());
    const auto r = reconstruct_from_output(outputs, channel_coefficients(clean_channel()), clean_channel().n_bar);
    const auto exact = assemble_curve(exact_moment_set(s));
    EXPECT_NEAR(r.curve.a0, exact.a0, 1e-8);
    EXPECT_NEAR(r.curve.a1, exact.a1, 1e-8);
    EXPECT_NEAR(r.curve.a2, exact.a2, 1e-8);
    EXPECT_EQ(r.moments.provenance(), Provenance::estimated);
  }
}

TEST(Reconstruction, OneSigmaCoverage) {
  const auto s = make_state(cubic_spec(0.1), basis128());
  const Reconstructor rec(s, basis128(), clean_channel());
  const double lambda = 0.1;
  const double truth = 0.5 * (1.0 + 9.0 * 0.0);
  int covered = 0;
  const int repeats = 50;
  for (int r = 0; r < repeats; ++r) {
    const auto run = rec.run(100'000, derive_seed(2024, r));
    if (std::abs(run.curve(lambda) - truth) <= run.curve.std_error(lambda)) ++covered;
  }
  const double coverage = double(covered) / repeats;
  EXPECT_GE(coverage, 0.55);
  EXPECT_LE(coverage, 0.80);
}

TEST(Ensemble, SmokeAndDeterminism) {
  const auto s = make_state(cubic_spec(0.1), basis128());
  const auto lambdas = linspace(-0.1, 0.3, 5);
  const auto a = ensemble_run(s, basis128(), clean_channel(), 1000, 3, 7, lambdas, 1);
  const auto b = ensemble_run(s, basis128(), clean_channel(), 1000, 3, 7, lambdas, 3);
  ASSERT_EQ(a.v.size(), 5u);
  EXPECT_EQ(a.replicates(), 3u);
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    EXPECT_EQ(a.v[i].mean, b.v[i].mean);
    EXPECT_EQ(a.v[i].std, b.v[i].std);
    EXPECT_TRUE(std::isfinite(a.v[i].mean));
  }
  EXPECT_EQ(a.seeds, b.seeds);
  EXPECT_EQ(a.seeds[1], derive_seed(7, 1));
  EXPECT_EQ(a.moments.size(), 13u);

  const auto small = ensemble_run(s, basis128(), clean_channel(), 100, 2, 1, lambdas);
  EXPECT_EQ(small.replicates(), 2u);
  EXPECT_THROW(ensemble_run(s, basis128(), clean_channel(), 100, 1, 1, lambdas), ConfigError);
}

TEST(Ensemble, SpreadGrowsWithThermalisation) {
  const auto s = make_state(cubic_spec(0.1), basis128());
  const std::vector<double> lambdas{0.1};
  ChannelParams cold = clean_channel();
  cold.Gamma_m = 1e-11;
  ChannelParams hot = clean_channel();
  hot.Gamma_m = 1e-5;
  const auto a = ensemble_run(s, basis128(), cold, 20'000, 8, 5, lambdas);
  const auto b = ensemble_run(s, basis128(), hot, 20'000, 8, 5, lambdas);
  EXPECT_GT(b.v[0].std, 3.0 * a.v[0].std);
}

TEST(Summarize, SampleStandardDeviation) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const auto s = summarize(xs);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
}

TEST(Linspace, Endpoints) {
  const auto g = default_lambda_grid();
  ASSERT_EQ(g.size(), 101u);
  EXPECT_EQ(g.front(), -0.2);
  EXPECT_EQ(g.back(), 0.4);
  EXPECT_NEAR(g[50], 0.1, 1e-15);
}
