#include "spurious_lens/theory.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "spurious_lens/error.hpp"
#include "spurious_lens/parallel.hpp"

namespace spurious_lens {
namespace {

constexpr std::uint64_t kStreamTrain = 101;
constexpr std::uint64_t kStreamTest = 102;
constexpr std::uint64_t kStreamDictImage = 103;
constexpr std::uint64_t kStreamDictText = 104;
constexpr std::size_t kMinMcSamples = 1000;
constexpr std::size_t kLowPowerSubgroup = 100;

double alignment_weight(const TheoryParams& p) {
  return 2.0 * p.mu_spu * p.p_spu - 1.0;
}

double binomial_stderr(std::optional<double> rate, std::size_t count) {
  if (!rate || count == 0) return 0.0;
  return std::sqrt(*rate * (1.0 - *rate) / double(count));
}

}  // namespace

TheoryParams theory_params(const GenerativeConfig& config) {
  return TheoryParams{config.sigma_inv, config.sigma_spu, config.mu_spu,
                      config.p_spu};
}

double std_normal_cdf(double x) {
  if (std::isnan(x)) {
    throw Error(ErrorCode::kDomain, "std_normal_cdf: NaN input");
  }
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kDomain,
                "normal quantile needs p in (0, 1), got " + std::to_string(p));
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double margin_stddev(const TheoryParams& params) {
  if (!(params.sigma_inv > 0.0)) {
    throw Error(ErrorCode::kSingularParameters,
                "sigma_inv must be > 0 for the margin to be non-degenerate");
  }
  const double s2 = params.sigma_inv * params.sigma_inv;
  const double w = alignment_weight(params);
  const double var = (1.0 + s2) * (1.0 + s2) * s2 +
                     w * w * params.sigma_spu * params.sigma_spu;
  if (!(var > 0.0) || !std::isfinite(var)) {
    throw Error(ErrorCode::kSingularParameters, "margin variance is zero");
  }
  return std::sqrt(var);
}

double kappa1(const TheoryParams& params) {
  const double s2 = params.sigma_inv * params.sigma_inv;
  return (s2 + 2.0 - 2.0 * params.mu_spu * params.p_spu) / margin_stddev(params);
}

double kappa2(const TheoryParams& params) {
  const double s2 = params.sigma_inv * params.sigma_inv;
  return (-2.0 * params.mu_spu * params.p_spu - s2) / margin_stddev(params);
}

TheoryBounds theorem_bounds(const TheoryParams& params) {
  TheoryBounds b;
  b.kappa1 = kappa1(params);
  b.kappa2 = kappa2(params);
  b.err_lower_conflicting = 1.0 - std_normal_cdf(b.kappa1);
  b.acc_lower_aligned = 1.0 - std_normal_cdf(b.kappa2);
  return b;
}

VerificationReport verify_theorem(const GenerativeConfig& config,
                                  std::size_t mc_samples, std::uint64_t seed,
                                  double tol) {
  config.validate();
  if (mc_samples < kMinMcSamples) {
    throw Error(ErrorCode::kInsufficientSamples,
                "verify_theorem needs at least 1000 Monte-Carlo samples, got " +
                    std::to_string(mc_samples));
  }

  VerificationReport report;
  report.config = config;
  report.bounds = theorem_bounds(theory_params(config));
  report.mc_samples = mc_samples;
  report.tol = tol;
  report.seed = seed;

  GenerativeConfig test_config = ood_config(config);
  test_config.n = static_cast<int>(mc_samples);

  AlignmentMatrix model;
  Dictionary dict_image;
  Dictionary dict_text;
  if (config.mode == GenerationMode::kTheoremExact) {
    dict_image = make_dictionary(config.d_I, derive_seed(seed, kStreamDictImage));
    dict_text = make_dictionary(config.d_T, derive_seed(seed, kStreamDictText));
    model = paper_minimizer(config, dict_image, dict_text);
  } else {
    const SyntheticDataset train =
        sample_dataset(config, derive_seed(seed, kStreamTrain));
    dict_image = train.dict_image;
    dict_text = train.dict_text;
    model = empirical_minimizer(train, config.rho);
    const Eigen::MatrixXd scaled = config.rho * model.entries;
    const Eigen::Matrix2d lemma = lemma_matrix(config);
    const Eigen::Matrix2d population = population_matrix(config);
    report.lemma_gap =
        (scaled - dict_image.entries * lemma * dict_text.entries.transpose())
            .norm() /
        lemma.norm();
    report.population_gap =
        (scaled - dict_image.entries * population * dict_text.entries.transpose())
            .norm() /
        population.norm();
  }

  const SyntheticDataset test = sample_dataset(
      test_config, derive_seed(seed, kStreamTest), dict_image, dict_text);
  const SubgroupReport groups =
      subgroup_accuracy(model, test, make_prompts(dict_text));

  report.n_aligned = groups.n_aligned;
  report.n_conflicting = groups.n_conflicting;
  report.low_power = groups.n_aligned < kLowPowerSubgroup ||
                     groups.n_conflicting < kLowPowerSubgroup;
  report.mc_acc_aligned = groups.acc_aligned.value_or(0.0);
  report.mc_err_conflicting =
      groups.acc_conflicting ? 1.0 - *groups.acc_conflicting : 0.0;
  report.stderr_aligned = binomial_stderr(groups.acc_aligned, groups.n_aligned);
  report.stderr_conflicting =
      binomial_stderr(groups.acc_conflicting, groups.n_conflicting);

  const bool have_both = groups.acc_aligned && groups.acc_conflicting;
  if (config.mode == GenerationMode::kTheoremExact) {
    report.pass =
        have_both &&
        std::abs(report.mc_err_conflicting - report.bounds.err_lower_conflicting) <=
            tol &&
        std::abs(report.mc_acc_aligned - report.bounds.acc_lower_aligned) <= tol;
  } else {
    report.pass = groups.acc_conflicting.has_value() &&
                  report.mc_err_conflicting >=
                      report.bounds.err_lower_conflicting - tol;
  }
  return report;
}

}  // namespace spurious_lens
