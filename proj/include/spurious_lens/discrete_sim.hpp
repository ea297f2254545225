#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spurious_lens {

// Desk-scale stand-in for the colored-digit experiment: the digit image is
// replaced by a one-hot object block that names the true class with
// probability p_inv, followed by a one-hot color block.
struct DiscreteConfig {
  int num_classes = 2;
  double p_inv = 0.75;
  double p_spu = 0.9;
  int n_train = 10000;
  int num_colors = 2;
  // Classes 0 and 1 are the biased pair; biased_colors[c] is class c's color.
  std::array<int, 2> biased_colors{0, 1};
  double feature_noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  int feature_dim() const { return num_classes + num_colors; }

  bool operator==(const DiscreteConfig&) const = default;
};

// Probability that a biased-pair class keeps its training color in the Rev
// split; the swapped color is used otherwise.
inline constexpr double kRevOriginalColorRate = 0.1;

enum class DiscreteSplit { kTrain, kRand, kRev };

struct DiscreteSample {
  Eigen::VectorXd features;  // [object block (k) | color block (num_colors)]
  int object_label = 0;
  int color_label = 0;
};

struct DiscreteData {
  Eigen::MatrixXd features;  // one row per sample
  std::vector<int> object_labels;
  std::vector<int> color_labels;

  std::size_t size() const { return object_labels.size(); }
  DiscreteSample sample(std::size_t i) const;
};

// Multinomial-logistic model: logits = weights * x + bias.
struct LinearClassifier {
  Eigen::MatrixXd weights;  // classes x feature_dim
  Eigen::VectorXd bias;

  std::vector<int> predict(const Eigen::MatrixXd& features) const;
};

// Separate linear heads over the same features. Zero-shot classification uses
// the object head only.
struct DualHeadClassifier {
  LinearClassifier object_head;
  LinearClassifier color_head;
};

struct TrainOptions {
  int epochs = 300;
  double step_size = 1.0;
  double min_step_size = 1e-6;
  double grad_tol = 1e-7;  // stop once every gradient entry is below this
};

struct SplitReport {
  double acc_rand_biased = 0.0;
  double acc_rev_biased = 0.0;
  std::optional<double> acc_rest;  // absent when k = 2
};

DiscreteData sample_discrete_dataset(const DiscreteConfig& config,
                                     DiscreteSplit split, int count,
                                     std::uint64_t seed);

// Mean cross-entropy and its gradient for a linear softmax head.
double softmax_cross_entropy(const LinearClassifier& model,
                             const Eigen::MatrixXd& features,
                             const std::vector<int>& labels,
                             LinearClassifier* gradient = nullptr);

// Full-batch gradient descent from zero weights; a step that raises the loss
// is undone and the step size halved. Stops early at grad_tol;
// kNonConvergence if the step size falls below min_step_size first.
LinearClassifier train_supervised(const DiscreteData& data, int num_classes,
                                  const TrainOptions& options);

// Object cross-entropy plus color cross-entropy, equally weighted. The heads
// share no parameters, so the joint objective separates per head.
DualHeadClassifier train_contrastive_perfect(const DiscreteData& data,
                                             int num_classes, int num_colors,
                                             const TrainOptions& options);

double joint_contrastive_loss(const DualHeadClassifier& model,
                              const DiscreteData& data,
                              DualHeadClassifier* gradient = nullptr);

double accuracy(const LinearClassifier& model, const DiscreteData& data);
double color_accuracy(const DualHeadClassifier& model, const DiscreteData& data);

SplitReport evaluate_splits(const LinearClassifier& model,
                            const DiscreteConfig& config, int n_test,
                            std::uint64_t seed);
SplitReport evaluate_splits(const DualHeadClassifier& model,
                            const DiscreteConfig& config, int n_test,
                            std::uint64_t seed);

// One method's results aggregated over seeds, as fractions.
struct MethodSummary {
  std::string method;
  double rand_mean = 0.0, rand_std = 0.0;
  double rev_mean = 0.0, rev_std = 0.0;
  std::optional<double> rest_mean, rest_std;
  std::vector<SplitReport> runs;
};

struct DiscreteRunSettings {
  TrainOptions train;
  int n_test = 10000;
};

// Trains both methods on seeds config.seed + 0 .. seeds-1 and summarizes.
// Seeds run in parallel; the result does not depend on the worker count.
std::array<MethodSummary, 2> run_discrete_experiment(
    const DiscreteConfig& config, const DiscreteRunSettings& settings,
    int seeds);

// Header "k,n,p_inv,p_spu,method,rand,rand_std,rev,rev_std,rest,rest_std".
std::string discrete_csv_header();
std::string discrete_csv_row(const DiscreteConfig& config,
                             const MethodSummary& summary);

}  // namespace spurious_lens
