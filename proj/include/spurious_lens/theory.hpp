#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "spurious_lens/clip_linear.hpp"
#include "spurious_lens/synthetic_data.hpp"

namespace spurious_lens {

struct TheoryParams {
  double sigma_inv = 1.0;
  double sigma_spu = 0.5;
  double mu_spu = 1.0;
  double p_spu = 0.9;
};

TheoryParams theory_params(const GenerativeConfig& config);

struct TheoryBounds {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double err_lower_conflicting = 0.0;  // 1 - Phi(kappa1)
  double acc_lower_aligned = 0.0;      // 1 - Phi(kappa2)
};

struct VerificationReport {
  GenerativeConfig config;
  TheoryBounds bounds;
  double mc_err_conflicting = 0.0;
  double mc_acc_aligned = 0.0;
  std::size_t mc_samples = 0;
  std::size_t n_aligned = 0;
  std::size_t n_conflicting = 0;
  double stderr_conflicting = 0.0;
  double stderr_aligned = 0.0;
  // Def1 only: ||rho M_emp - D_I A D_T^T||_F / ||A||_F against the lemma
  // matrix and against the latent covariance.
  std::optional<double> lemma_gap;
  std::optional<double> population_gap;
  bool low_power = false;  // a subgroup has fewer than 100 samples
  double tol = 0.0;
  std::uint64_t seed = 0;
  bool pass = false;
};

// Phi(x) = erfc(-x / sqrt 2) / 2. Throws kDomain on NaN.
double std_normal_cdf(double x);

// Phi^{-1}(p) for p in (0, 1); kDomain otherwise.
double std_normal_quantile(double p);

// sqrt((1 + s_inv^2)^2 s_inv^2 + (2 mu_spu p_spu - 1)^2 s_spu^2); throws
// kSingularParameters when sigma_inv <= 0 or the value is 0.
double margin_stddev(const TheoryParams& params);

// (s_inv^2 + 2 - 2 mu_spu p_spu) / margin_stddev
double kappa1(const TheoryParams& params);
// (-2 mu_spu p_spu - s_inv^2) / margin_stddev
double kappa2(const TheoryParams& params);

TheoryBounds theorem_bounds(const TheoryParams& params);

// Monte-Carlo check of the zero-shot error bounds on the OOD distribution.
// TheoremExact scores with the idealized minimizer and is a two-sided check;
// Def1 trains the empirical minimizer on config.n pairs and is one-sided
// (mc error >= bound - tol).
VerificationReport verify_theorem(const GenerativeConfig& config,
                                  std::size_t mc_samples, std::uint64_t seed,
                                  double tol);

}  // namespace spurious_lens
