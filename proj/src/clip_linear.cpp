#include "spurious_lens/clip_linear.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "spurious_lens/error.hpp"
#include "spurious_lens/parallel.hpp"

namespace spurious_lens {
namespace {

void check_rho(double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw Error(ErrorCode::kInvalidRegularizer,
                "rho must be > 0, got " + std::to_string(rho));
  }
}

void check_shapes(const AlignmentMatrix& m, const SyntheticDataset& dataset) {
  if (m.image_dim() != dataset.config.d_I || m.text_dim() != dataset.config.d_T) {
    throw Error(ErrorCode::kShapeMismatch,
                "alignment matrix is " + std::to_string(m.image_dim()) + "x" +
                    std::to_string(m.text_dim()) + ", dataset needs " +
                    std::to_string(dataset.config.d_I) + "x" +
                    std::to_string(dataset.config.d_T));
  }
}

// B = (n * paired - image_sum text_sum^T) / (n (n-1)).
Eigen::MatrixXd data_term(const CrossMoments& moments) {
  const double n = static_cast<double>(moments.n);
  return (n * moments.paired - moments.image_sum * moments.text_sum.transpose()) /
         (n * (n - 1.0));
}

}  // namespace

CrossMoments cross_moments(const SyntheticDataset& dataset) {
  if (dataset.samples.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                "the contrastive loss needs at least 2 pairs, got " +
                    std::to_string(dataset.samples.size()));
  }
  const auto& cfg = dataset.config;
  const std::size_t n = dataset.samples.size();
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  std::vector<CrossMoments> partial(chunks);

  parallel_for_chunks(chunks, [&](std::size_t chunk) {
    CrossMoments& p = partial[chunk];
    const std::size_t begin = chunk * kSampleChunk;
    const std::size_t end = std::min(n, begin + kSampleChunk);
    Eigen::MatrixXd xi(cfg.d_I, end - begin);
    Eigen::MatrixXd xt(cfg.d_T, end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      xi.col(i - begin) = dataset.samples[i].x_image;
      xt.col(i - begin) = dataset.samples[i].x_text;
    }
    p.paired = xi * xt.transpose();
    p.image_sum = xi.rowwise().sum();
    p.text_sum = xt.rowwise().sum();
    p.n = end - begin;
  });

  CrossMoments total;
  total.paired = Eigen::MatrixXd::Zero(cfg.d_I, cfg.d_T);
  total.image_sum = Eigen::VectorXd::Zero(cfg.d_I);
  total.text_sum = Eigen::VectorXd::Zero(cfg.d_T);
  for (const auto& p : partial) {
    total.paired += p.paired;
    total.image_sum += p.image_sum;
    total.text_sum += p.text_sum;
    total.n += p.n;
  }
  return total;
}

double clip_loss(const AlignmentMatrix& m, const SyntheticDataset& dataset,
                 double rho) {
  check_shapes(m, dataset);
  const CrossMoments moments = cross_moments(dataset);
  const double n = static_cast<double>(moments.n);
  const double all_pairs =
      moments.image_sum.dot(m.entries * moments.text_sum);
  const double matched = (m.entries.array() * moments.paired.array()).sum();
  return (all_pairs - n * matched) / (n * (n - 1.0)) +
         0.5 * rho * m.entries.squaredNorm();
}

Eigen::MatrixXd clip_loss_gradient(const AlignmentMatrix& m,
                                   const SyntheticDataset& dataset, double rho) {
  check_shapes(m, dataset);
  return rho * m.entries - data_term(cross_moments(dataset));
}

AlignmentMatrix empirical_minimizer(const SyntheticDataset& dataset, double rho) {
  check_rho(rho);
  return AlignmentMatrix{data_term(cross_moments(dataset)) / rho};
}

Eigen::Matrix2d lemma_matrix(const GenerativeConfig& config) {
  const double w = 2.0 * config.mu_spu * config.p_spu - 1.0;
  Eigen::Matrix2d a;
  a << 1.0 + config.sigma_inv * config.sigma_inv, w,
      w, 1.0 + config.sigma_spu * config.sigma_spu;
  return a;
}

Eigen::Matrix2d population_matrix(const GenerativeConfig& config) {
  const double spu_scale =
      config.mode == GenerationMode::kDef1 ? config.mu_spu : 1.0;
  const double corr = 2.0 * config.p_spu - 1.0;  // E[y a]
  Eigen::Matrix2d c;
  c << config.mu_inv * config.mu_inv + config.sigma_inv * config.sigma_inv,
      config.mu_inv * spu_scale * corr,
      config.mu_inv * spu_scale * corr,
      spu_scale * spu_scale + config.sigma_spu * config.sigma_spu;
  return c;
}

AlignmentMatrix paper_minimizer(const GenerativeConfig& config,
                                const Dictionary& dict_image,
                                const Dictionary& dict_text) {
  check_rho(config.rho);
  return AlignmentMatrix{dict_image.entries * lemma_matrix(config) *
                         dict_text.entries.transpose() / config.rho};
}

AlignmentMatrix gradient_descent_minimizer(const SyntheticDataset& dataset,
                                           double rho, int steps,
                                           double step_size) {
  check_rho(rho);
  if (steps < 1) {
    throw Error(ErrorCode::kInvalidConfig, "steps must be >= 1");
  }
  if (!(step_size > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "step_size must be > 0");
  }
  const CrossMoments moments = cross_moments(dataset);
  const Eigen::MatrixXd b = data_term(moments);
  // On this quadratic, loss(M) = (rho/2)||M||^2 - <B, M>.
  auto loss = [&](const Eigen::MatrixXd& m) {
    return 0.5 * rho * m.squaredNorm() - (b.array() * m.array()).sum();
  };

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(b.rows(), b.cols());
  double previous = loss(m);
  int increases = 0;
  for (int step = 1; step <= steps; ++step) {
    m -= step_size * (rho * m - b);
    const double current = loss(m);
    // Rounding jitter at the fixed point is not an increase.
    const double slack = 1e-12 * (1.0 + std::abs(previous));
    increases = current > previous + slack ? increases + 1 : 0;
    if (increases >= 10 || !std::isfinite(current)) {
      throw Error(ErrorCode::kNonConvergence,
                  "gradient descent diverged at step " + std::to_string(step) +
                      " (step_size " + std::to_string(step_size) + ", rho " +
                      std::to_string(rho) + ")");
    }
    previous = current;
  }
  return AlignmentMatrix{m};
}

PromptEmbedding prompt_embedding(const Dictionary& dict_text, Label label) {
  if (label != 1 && label != -1) {
    throw Error(ErrorCode::kInvalidLabel,
                "prompt label must be -1 or +1, got " + std::to_string(label));
  }
  return PromptEmbedding{label, dict_text.entries.col(0) * double(label)};
}

PromptPair make_prompts(const Dictionary& dict_text) {
  return PromptPair{prompt_embedding(dict_text, 1),
                    prompt_embedding(dict_text, -1)};
}

Label zero_shot_predict(const AlignmentMatrix& m,
                        const Eigen::Ref<const Eigen::VectorXd>& x_image,
                        const PromptPair& prompts) {
  if (prompts.positive.label != 1 || prompts.negative.label != -1) {
    throw Error(ErrorCode::kInvalidLabel, "prompts must cover labels +1 and -1");
  }
  if (x_image.size() != m.image_dim() ||
      prompts.positive.vector.size() != m.text_dim() ||
      prompts.negative.vector.size() != m.text_dim()) {
    throw Error(ErrorCode::kShapeMismatch,
                "image or prompt dimension does not match the alignment matrix");
  }
  const Eigen::RowVectorXd projected = x_image.transpose() * m.entries;
  const double pos = projected.dot(prompts.positive.vector);
  const double neg = projected.dot(prompts.negative.vector);
  return pos >= neg ? 1 : -1;
}

SubgroupReport subgroup_accuracy(const AlignmentMatrix& m,
                                 const SyntheticDataset& testset,
                                 const PromptPair& prompts) {
  const std::size_t n = testset.samples.size();
  if (n == 0) {
    throw Error(ErrorCode::kInsufficientData, "test set is empty");
  }
  struct Counts {
    std::size_t n_aligned = 0, n_conflicting = 0;
    std::size_t ok_aligned = 0, ok_conflicting = 0;
  };
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  std::vector<Counts> partial(chunks);
  parallel_for_chunks(chunks, [&](std::size_t chunk) {
    Counts& c = partial[chunk];
    const std::size_t end = std::min(n, (chunk + 1) * kSampleChunk);
    for (std::size_t i = chunk * kSampleChunk; i < end; ++i) {
      const auto& s = testset.samples[i];
      const bool ok = zero_shot_predict(m, s.x_image, prompts) == s.label;
      if (s.attribute == s.label) {
        ++c.n_aligned;
        c.ok_aligned += ok;
      } else {
        ++c.n_conflicting;
        c.ok_conflicting += ok;
      }
    }
  });

  SubgroupReport report;
  for (const auto& c : partial) {
    report.n_aligned += c.n_aligned;
    report.n_conflicting += c.n_conflicting;
    report.correct_aligned += c.ok_aligned;
    report.correct_conflicting += c.ok_conflicting;
  }
  auto rate = [](std::size_t ok, std::size_t total) -> std::optional<double> {
    if (total == 0) return std::nullopt;
    return double(ok) / double(total);
  };
  report.acc_aligned = rate(report.correct_aligned, report.n_aligned);
  report.acc_conflicting = rate(report.correct_conflicting, report.n_conflicting);
  report.acc_overall = rate(report.correct_aligned + report.correct_conflicting,
                            report.n_aligned + report.n_conflicting);
  return report;
}

double relative_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace spurious_lens
