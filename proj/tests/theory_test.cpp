#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spurious_lens/error.hpp"
#include "spurious_lens/parallel.hpp"
#include "spurious_lens/theory.hpp"

namespace spurious_lens {
namespace {

TheoryParams headline() { return TheoryParams{1.0, 0.5, 2.0, 0.95}; }

GenerativeConfig exact_config(double sigma_inv, double sigma_spu, double mu_spu,
                              double p_spu) {
  GenerativeConfig c;
  c.mode = GenerationMode::kTheoremExact;
  c.mu_inv = 1.0;
  c.sigma_inv = sigma_inv;
  c.sigma_spu = sigma_spu;
  c.mu_spu = mu_spu;
  c.p_spu = p_spu;
  c.sigma_xi = 0.0;
  c.d_I = 8;
  c.d_T = 8;
  return c;
}

TEST(StdNormalCdf, Identities) {
  EXPECT_EQ(std_normal_cdf(0.0), 0.5);
  for (double x : {0.5, 1.0, 2.0, 5.0}) {
    EXPECT_NEAR(std_normal_cdf(-x) + std_normal_cdf(x), 1.0, 1e-12);
  }
  EXPECT_NEAR(std_normal_cdf(1.96), 0.97500, 1e-5);
}

TEST(StdNormalCdf, AgreesWithQuadratureOracle) {
  for (double x = -8.0; x <= 8.0; x += 0.25) {
    EXPECT_NEAR(std_normal_cdf(x), oracle::normal_cdf_quadrature(x), 1e-10) << x;
  }
}

TEST(StdNormalCdf, MonotoneAndBounded) {
  double previous = 0.0;
  for (double x = -40.0; x <= 40.0; x += 0.01) {
    const double v = std_normal_cdf(x);
    ASSERT_GE(v, previous) << x;
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    previous = v;
  }
}

TEST(StdNormalCdf, NanIsADomainError) {
  try {
    std_normal_cdf(std::nan(""));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDomain);
  }
}

TEST(StdNormalQuantile, InvertsTheCdf) {
  for (double p : {1e-6, 0.01, 0.3, 0.5, 0.8, 0.975, 0.999999}) {
    EXPECT_NEAR(std_normal_cdf(std_normal_quantile(p)), p, 1e-12 + 1e-9 * p);
  }
  EXPECT_THROW(std_normal_quantile(0.0), Error);
  EXPECT_THROW(std_normal_quantile(1.0), Error);
}

TEST(Kappa, HeadlineValues) {
  // Hand substitution: (1 + 2 - 3.8) / sqrt(4 + 1.96), (-3.8 - 1) / sqrt(5.96).
  EXPECT_NEAR(kappa1(headline()), -0.8 / std::sqrt(5.96), 1e-14);
  EXPECT_NEAR(kappa1(headline()), -0.32769, 1e-4);
  EXPECT_NEAR(kappa2(headline()), -4.8 / std::sqrt(5.96), 1e-14);
  EXPECT_NEAR(kappa2(headline()), -1.96616, 1e-4);
}

TEST(Kappa, SpecialCases) {
  // mu_spu p_spu = (s_inv^2 + 2) / 2 zeroes the numerator.
  TheoryParams p{1.0, 0.5, 1.5, 1.0};
  EXPECT_EQ(kappa1(p), 0.0);

  // 2 mu_spu p_spu = 1: denominator is (1 + s_inv^2) s_inv.
  TheoryParams neutral{1.0, 0.5, 0.5, 1.0};
  EXPECT_NEAR(kappa1(neutral), 1.0, 1e-15);
  EXPECT_NEAR(kappa2(neutral), -1.0, 1e-15);
  neutral.sigma_inv = 0.5;
  EXPECT_NEAR(kappa1(neutral), (0.25 + 1.0) / (1.25 * 0.5), 1e-15);
}

TEST(Kappa, SecondBelowFirst) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    TheoryParams p{0.1 + 2 * u(rng), 2 * u(rng), 3 * u(rng), 0.5 + 0.5 * u(rng)};
    ASSERT_LT(kappa2(p), kappa1(p));
  }
}

TEST(Kappa, SingularParameters) {
  TheoryParams p{0.0, 0.0, 1.0, 0.9};
  try {
    kappa1(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularParameters);
  }
  EXPECT_THROW(theorem_bounds(p), Error);
}

TEST(TheoremBounds, Assembly) {
  const TheoryBounds b = theorem_bounds(headline());
  EXPECT_NEAR(b.err_lower_conflicting,
              1.0 - oracle::normal_cdf_quadrature(-0.8 / std::sqrt(5.96)), 1e-12);
  EXPECT_NEAR(b.err_lower_conflicting, 0.6284, 1e-4);
  EXPECT_NEAR(b.acc_lower_aligned, 0.9754, 1e-4);

  const TheoryBounds zero = theorem_bounds(TheoryParams{1.0, 0.5, 1.5, 1.0});
  EXPECT_EQ(zero.err_lower_conflicting, 0.5);
}

TEST(TheoremBounds, RangeOnRandomParameters) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const TheoryBounds b =
        theorem_bounds(TheoryParams{0.05 + 3 * u(rng), 3 * u(rng), 5 * u(rng),
                                    0.5 + 0.5 * u(rng)});
    EXPECT_GE(b.err_lower_conflicting, 0.0);
    EXPECT_LE(b.err_lower_conflicting, 1.0);
    EXPECT_GE(b.acc_lower_aligned, 0.0);
    EXPECT_LE(b.acc_lower_aligned, 1.0);
  }
}

TEST(TheoremBounds, ErrorGrowsWithSpuriousStrength) {
  double previous = -1.0;
  for (double mu = 0.6; mu <= 4.0; mu += 0.1) {
    const double err = theorem_bounds(TheoryParams{1.0, 0.5, mu, 0.95}).err_lower_conflicting;
    ASSERT_GT(err, previous) << mu;
    previous = err;
  }
  previous = -1.0;
  for (double p = 0.6; p <= 1.0 + 1e-12; p += 0.02) {
    const double err = theorem_bounds(TheoryParams{0.8, 0.3, 2.0, p}).err_lower_conflicting;
    ASSERT_GT(err, previous) << p;
    previous = err;
  }
}

TEST(VerifyTheorem, HeadlineMonteCarlo) {
  const VerificationReport r =
      verify_theorem(exact_config(1.0, 0.5, 2.0, 0.95), 100000, 2024, 0.01);
  EXPECT_NEAR(r.mc_err_conflicting, 0.6284, 0.01);
  EXPECT_NEAR(r.mc_acc_aligned, 0.9754, 0.005);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(r.lemma_gap.has_value());
  EXPECT_EQ(r.n_aligned + r.n_conflicting, 100000u);
  EXPECT_FALSE(r.low_power);
}

TEST(VerifyTheorem, TightAcrossAParameterGrid) {
  const GenerativeConfig grid[] = {
      exact_config(1.0, 0.5, 2.0, 0.95), exact_config(0.8, 0.3, 1.5, 0.9),
      exact_config(1.2, 0.6, 3.0, 0.99), exact_config(0.5, 0.2, 1.0, 0.75),
      exact_config(1.0, 0.0, 2.5, 1.0)};
  for (const auto& c : grid) {
    const VerificationReport r = verify_theorem(c, 100000, 7, 0.01);
    const double tol_err = std::max(0.01, 4.0 * r.stderr_conflicting);
    const double tol_acc = std::max(0.01, 4.0 * r.stderr_aligned);
    EXPECT_LE(std::abs(r.mc_err_conflicting - r.bounds.err_lower_conflicting), tol_err);
    EXPECT_LE(std::abs(r.mc_acc_aligned - r.bounds.acc_lower_aligned), tol_acc);
  }
}

TEST(VerifyTheorem, NeutralWeightMakesSubgroupsIdentical) {
  const VerificationReport r =
      verify_theorem(exact_config(1.0, 0.5, 0.5, 1.0), 100000, 3, 0.01);
  const double se = std::hypot(r.stderr_conflicting, r.stderr_aligned);
  EXPECT_LE(std::abs(r.mc_err_conflicting - (1.0 - r.mc_acc_aligned)), 3.0 * se);
}

TEST(VerifyTheorem, Def1LemmaGapShrinksWithN) {
  GenerativeConfig c;
  c.mode = GenerationMode::kDef1;
  c.mu_inv = 1.0;
  c.mu_spu = 1.0;
  c.sigma_inv = 1.0;
  c.sigma_spu = 0.5;
  c.p_spu = 0.9;
  c.sigma_xi = 0.01;
  c.n = 10000;
  const VerificationReport small = verify_theorem(c, 10000, 5, 0.01);
  c.n = 40000;
  const VerificationReport large = verify_theorem(c, 10000, 5, 0.01);
  ASSERT_TRUE(small.lemma_gap && large.lemma_gap);
  EXPECT_LE(*small.lemma_gap, 0.1);
  EXPECT_LT(*large.lemma_gap, *small.lemma_gap);
  EXPECT_TRUE(small.pass);
}

TEST(VerifyTheorem, ReproducibleAndWorkerIndependent) {
  const GenerativeConfig c = exact_config(1.0, 0.5, 2.0, 0.95);
  set_worker_count_override(1);
  const VerificationReport a = verify_theorem(c, 20000, 11, 0.01);
  set_worker_count_override(3);
  const VerificationReport b = verify_theorem(c, 20000, 11, 0.01);
  set_worker_count_override(std::nullopt);
  EXPECT_EQ(a.mc_err_conflicting, b.mc_err_conflicting);
  EXPECT_EQ(a.mc_acc_aligned, b.mc_acc_aligned);
  EXPECT_EQ(a.n_aligned, b.n_aligned);
}

TEST(VerifyTheorem, SampleFloorAndLowPower) {
  try {
    verify_theorem(exact_config(1.0, 0.5, 2.0, 0.95), 999, 0, 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientSamples);
  }
  // OOD data splits ~50/50, so 1000 samples are not low power; p_spu is
  // irrelevant to the test distribution.
  const VerificationReport r =
      verify_theorem(exact_config(1.0, 0.5, 2.0, 0.95), 1000, 0, 0.05);
  EXPECT_FALSE(r.low_power);
}

}  // namespace
}  // namespace spurious_lens
