#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "spurious_lens/synthetic_data.hpp"

namespace spurious_lens {

// M = W_I^T W_T, d_I x d_T. The linearized contrastive loss depends on the two
// encoders only through this product, so M is optimized directly.
struct AlignmentMatrix {
  Eigen::MatrixXd entries;

  Eigen::Index image_dim() const { return entries.rows(); }
  Eigen::Index text_dim() const { return entries.cols(); }
};

struct PromptEmbedding {
  Label label = 1;
  Eigen::VectorXd vector;
};

struct PromptPair {
  PromptEmbedding positive;
  PromptEmbedding negative;
};

struct SubgroupReport {
  std::optional<double> acc_overall;
  std::optional<double> acc_aligned;      // a == y
  std::optional<double> acc_conflicting;  // a != y
  std::size_t n_aligned = 0;
  std::size_t n_conflicting = 0;
  std::size_t correct_aligned = 0;
  std::size_t correct_conflicting = 0;
};

// Sufficient statistics of a dataset for the linearized loss:
// paired = sum_i x_I^i (x_T^i)^T, image_sum = sum_i x_I^i, text_sum = sum_i x_T^i.
struct CrossMoments {
  Eigen::MatrixXd paired;
  Eigen::VectorXd image_sum;
  Eigen::VectorXd text_sum;
  std::size_t n = 0;
};

CrossMoments cross_moments(const SyntheticDataset& dataset);

// (1/(2n(n-1))) sum_{i!=j} (s_ij - s_ii) + (1/(2n(n-1))) sum_{i!=j} (s_ji - s_ii)
//   + (rho/2) ||M||_F^2, with s_ij = x_I^i . M . x_T^j.
double clip_loss(const AlignmentMatrix& m, const SyntheticDataset& dataset,
                 double rho);

// d clip_loss / dM = rho M - B, where
// B = (n * paired - image_sum text_sum^T) / (n (n-1)).
Eigen::MatrixXd clip_loss_gradient(const AlignmentMatrix& m,
                                   const SyntheticDataset& dataset, double rho);

// Exact stationary point M* = B / rho.
AlignmentMatrix empirical_minimizer(const SyntheticDataset& dataset, double rho);

// [[1 + s_inv^2, 2 mu_spu p_spu - 1], [2 mu_spu p_spu - 1, 1 + s_spu^2]].
Eigen::Matrix2d lemma_matrix(const GenerativeConfig& config);

// Latent covariance Cov(z) of the configured training distribution, which is
// the n -> infinity limit of rho * D_I^T M* D_T. Coincides with lemma_matrix
// when mu_inv = mu_spu = 1 in Def1 mode.
Eigen::Matrix2d population_matrix(const GenerativeConfig& config);

// (1/rho) D_I lemma_matrix D_T^T.
AlignmentMatrix paper_minimizer(const GenerativeConfig& config,
                                const Dictionary& dict_image,
                                const Dictionary& dict_text);

// Full-batch gradient descent from M = 0. Throws kNonConvergence once the
// loss has increased for 10 consecutive steps.
AlignmentMatrix gradient_descent_minimizer(const SyntheticDataset& dataset,
                                           double rho, int steps,
                                           double step_size);

// D_T [label, 0]: an object-only prompt with no background component.
PromptEmbedding prompt_embedding(const Dictionary& dict_text, Label label);
PromptPair make_prompts(const Dictionary& dict_text);

// argmax over the two prompts of x_image . M . p; exact ties go to +1.
Label zero_shot_predict(const AlignmentMatrix& m,
                        const Eigen::Ref<const Eigen::VectorXd>& x_image,
                        const PromptPair& prompts);

SubgroupReport subgroup_accuracy(const AlignmentMatrix& m,
                                 const SyntheticDataset& testset,
                                 const PromptPair& prompts);

// ||A - B||_F / ||B||_F.
double relative_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace spurious_lens
