#include "spurious_lens/discrete_sim.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "spurious_lens/error.hpp"
#include "spurious_lens/parallel.hpp"

namespace spurious_lens {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, "invalid discrete config: " + what);
}

// Uniform draw from [0, n) excluding `skip`.
int uniform_excluding(std::mt19937_64& rng, int n, int skip) {
  std::uniform_int_distribution<int> pick(0, n - 2);
  const int v = pick(rng);
  return v >= skip ? v + 1 : v;
}

int draw_color(const DiscreteConfig& cfg, DiscreteSplit split, int label,
               std::mt19937_64& rng) {
  std::uniform_int_distribution<int> any_color(0, cfg.num_colors - 1);
  const bool biased_class = label == 0 || label == 1;
  if (!biased_class || split == DiscreteSplit::kRand) return any_color(rng);

  const int own = cfg.biased_colors[label];
  if (split == DiscreteSplit::kTrain) {
    std::bernoulli_distribution keep(cfg.p_spu);
    return keep(rng) ? own : uniform_excluding(rng, cfg.num_colors, own);
  }
  std::bernoulli_distribution keep(kRevOriginalColorRate);
  return keep(rng) ? own : cfg.biased_colors[1 - label];
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double top = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - top).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

LinearClassifier zero_head(int classes, int dim) {
  return LinearClassifier{Eigen::MatrixXd::Zero(classes, dim),
                          Eigen::VectorXd::Zero(classes)};
}

void axpy(LinearClassifier& model, double scale, const LinearClassifier& delta) {
  model.weights += scale * delta.weights;
  model.bias += scale * delta.bias;
}

double max_abs(const LinearClassifier& g) {
  return std::max(g.weights.cwiseAbs().maxCoeff(), g.bias.cwiseAbs().maxCoeff());
}

double max_abs(const DualHeadClassifier& g) {
  return std::max(max_abs(g.object_head), max_abs(g.color_head));
}

template <typename Model, typename LossFn, typename StepFn>
Model descend(Model model, const TrainOptions& options, LossFn loss_and_grad,
              StepFn apply_step) {
  if (options.epochs < 1 || !(options.step_size > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "epochs must be >= 1 and step_size > 0");
  }
  Model grad = model;
  double loss = loss_and_grad(model, &grad);
  double step = options.step_size;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    if (max_abs(grad) < options.grad_tol) break;
    for (;;) {
      Model candidate = model;
      apply_step(candidate, -step, grad);
      Model candidate_grad = candidate;
      const double candidate_loss = loss_and_grad(candidate, &candidate_grad);
      if (std::isfinite(candidate_loss) && candidate_loss <= loss) {
        model = std::move(candidate);
        grad = std::move(candidate_grad);
        loss = candidate_loss;
        break;
      }
      step *= 0.5;
      if (step < options.min_step_size) {
        throw Error(ErrorCode::kNonConvergence,
                    "training stalled at epoch " + std::to_string(epoch) +
                        ": step size fell below " +
                        std::to_string(options.min_step_size));
      }
    }
  }
  return model;
}

double accuracy_on(const LinearClassifier& model, const DiscreteData& data,
                   bool (*keep)(int, int), int num_classes) {
  const std::vector<int> pred = model.predict(data.features);
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!keep(data.object_labels[i], num_classes)) continue;
    ++total;
    hit += pred[i] == data.object_labels[i];
  }
  return total == 0 ? 0.0 : double(hit) / double(total);
}

bool is_biased_class(int label, int) { return label == 0 || label == 1; }
bool is_rest_class(int label, int) { return label >= 2; }

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = xs.size() > 1 ? std::sqrt(ss / double(xs.size() - 1)) : 0.0;
}

MethodSummary summarize(std::string method, std::vector<SplitReport> runs) {
  MethodSummary s;
  s.method = std::move(method);
  std::vector<double> rand, rev, rest;
  for (const auto& r : runs) {
    rand.push_back(r.acc_rand_biased);
    rev.push_back(r.acc_rev_biased);
    if (r.acc_rest) rest.push_back(*r.acc_rest);
  }
  mean_std(rand, s.rand_mean, s.rand_std);
  mean_std(rev, s.rev_mean, s.rev_std);
  if (!rest.empty() && rest.size() == runs.size()) {
    double m = 0, sd = 0;
    mean_std(rest, m, sd);
    s.rest_mean = m;
    s.rest_std = sd;
  }
  s.runs = std::move(runs);
  return s;
}

}  // namespace

void DiscreteConfig::validate() const {
  require(num_classes >= 2, "num_classes must be >= 2");
  const double chance = 1.0 / num_classes;
  require(p_inv > chance && p_inv <= 1.0, "p_inv must lie in (1/k, 1]");
  require(p_spu >= chance && p_spu <= 1.0, "p_spu must lie in [1/k, 1]");
  require(n_train >= 1, "n_train must be positive");
  require(num_colors >= num_classes, "num_colors must be >= num_classes");
  require(biased_colors[0] != biased_colors[1], "biased colors must differ");
  for (int c : biased_colors)
    require(c >= 0 && c < num_colors, "biased color index out of range");
  require(feature_noise >= 0.0 && std::isfinite(feature_noise),
          "feature_noise must be >= 0");
}

DiscreteSample DiscreteData::sample(std::size_t i) const {
  return DiscreteSample{features.row(static_cast<Eigen::Index>(i)).transpose(),
                        object_labels[i], color_labels[i]};
}

std::vector<int> LinearClassifier::predict(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd logits =
      (features * weights.transpose()).rowwise() + bias.transpose();
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    logits.row(r).maxCoeff(&best);  // first maximum on ties
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

DiscreteData sample_discrete_dataset(const DiscreteConfig& config,
                                     DiscreteSplit split, int count,
                                     std::uint64_t seed) {
  config.validate();
  if (count < 1) throw Error(ErrorCode::kInvalidConfig, "sample count must be >= 1");

  const int k = config.num_classes;
  DiscreteData data;
  data.features = Eigen::MatrixXd::Zero(count, config.feature_dim());
  data.object_labels.resize(static_cast<std::size_t>(count));
  data.color_labels.resize(static_cast<std::size_t>(count));

  auto rng = make_engine(seed, static_cast<std::uint64_t>(split));
  std::uniform_int_distribution<int> any_class(0, k - 1);
  std::bernoulli_distribution faithful(config.p_inv);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int i = 0; i < count; ++i) {
    const int label = any_class(rng);
    const int shown = faithful(rng) ? label : uniform_excluding(rng, k, label);
    const int color = draw_color(config, split, label, rng);
    data.features(i, shown) = 1.0;
    if (config.feature_noise > 0.0) {
      for (int c = 0; c < k; ++c) data.features(i, c) += config.feature_noise * gauss(rng);
    }
    data.features(i, k + color) = 1.0;
    data.object_labels[static_cast<std::size_t>(i)] = label;
    data.color_labels[static_cast<std::size_t>(i)] = color;
  }
  return data;
}

double softmax_cross_entropy(const LinearClassifier& model,
                             const Eigen::MatrixXd& features,
                             const std::vector<int>& labels,
                             LinearClassifier* gradient) {
  const auto n = features.rows();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size()) {
    throw Error(ErrorCode::kInsufficientData, "need one label per nonempty row");
  }
  const Eigen::MatrixXd logits =
      (features * model.weights.transpose()).rowwise() + model.bias.transpose();
  Eigen::MatrixXd prob = softmax_rows(logits);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    const double top = logits.row(r).maxCoeff();
    const double log_z = top + std::log((logits.row(r).array() - top).exp().sum());
    loss += log_z - logits(r, y);
    prob(r, y) -= 1.0;
  }
  if (gradient) {
    gradient->weights = prob.transpose() * features / double(n);
    gradient->bias = prob.colwise().sum().transpose() / double(n);
  }
  return loss / double(n);
}

LinearClassifier train_supervised(const DiscreteData& data, int num_classes,
                                  const TrainOptions& options) {
  if (data.size() == 0) {
    throw Error(ErrorCode::kInsufficientData, "training data is empty");
  }
  return descend(
      zero_head(num_classes, static_cast<int>(data.features.cols())), options,
      [&](const LinearClassifier& m, LinearClassifier* g) {
        return softmax_cross_entropy(m, data.features, data.object_labels, g);
      },
      [](LinearClassifier& m, double scale, const LinearClassifier& g) {
        axpy(m, scale, g);
      });
}

double joint_contrastive_loss(const DualHeadClassifier& model,
                              const DiscreteData& data,
                              DualHeadClassifier* gradient) {
  return softmax_cross_entropy(model.object_head, data.features,
                               data.object_labels,
                               gradient ? &gradient->object_head : nullptr) +
         softmax_cross_entropy(model.color_head, data.features,
                               data.color_labels,
                               gradient ? &gradient->color_head : nullptr);
}

DualHeadClassifier train_contrastive_perfect(const DiscreteData& data,
                                             int num_classes, int num_colors,
                                             const TrainOptions& options) {
  if (data.size() == 0) {
    throw Error(ErrorCode::kInsufficientData, "training data is empty");
  }
  const int dim = static_cast<int>(data.features.cols());
  return descend(
      DualHeadClassifier{zero_head(num_classes, dim), zero_head(num_colors, dim)},
      options,
      [&](const DualHeadClassifier& m, DualHeadClassifier* g) {
        return joint_contrastive_loss(m, data, g);
      },
      [](DualHeadClassifier& m, double scale, const DualHeadClassifier& g) {
        axpy(m.object_head, scale, g.object_head);
        axpy(m.color_head, scale, g.color_head);
      });
}

double accuracy(const LinearClassifier& model, const DiscreteData& data) {
  const std::vector<int> pred = model.predict(data.features);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hit += pred[i] == data.object_labels[i];
  return data.size() == 0 ? 0.0 : double(hit) / double(data.size());
}

double color_accuracy(const DualHeadClassifier& model, const DiscreteData& data) {
  const std::vector<int> pred = model.color_head.predict(data.features);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hit += pred[i] == data.color_labels[i];
  return data.size() == 0 ? 0.0 : double(hit) / double(data.size());
}

SplitReport evaluate_splits(const LinearClassifier& model,
                            const DiscreteConfig& config, int n_test,
                            std::uint64_t seed) {
  const DiscreteData rand =
      sample_discrete_dataset(config, DiscreteSplit::kRand, n_test, seed);
  const DiscreteData rev =
      sample_discrete_dataset(config, DiscreteSplit::kRev, n_test, seed);
  const int k = config.num_classes;
  SplitReport report;
  report.acc_rand_biased = accuracy_on(model, rand, is_biased_class, k);
  report.acc_rev_biased = accuracy_on(model, rev, is_biased_class, k);
  if (k > 2) report.acc_rest = accuracy_on(model, rand, is_rest_class, k);
  return report;
}

SplitReport evaluate_splits(const DualHeadClassifier& model,
                            const DiscreteConfig& config, int n_test,
                            std::uint64_t seed) {
  return evaluate_splits(model.object_head, config, n_test, seed);
}

std::array<MethodSummary, 2> run_discrete_experiment(
    const DiscreteConfig& config, const DiscreteRunSettings& settings,
    int seeds) {
  config.validate();
  if (seeds < 1) throw Error(ErrorCode::kInvalidConfig, "seeds must be >= 1");

  std::vector<SplitReport> contrastive(static_cast<std::size_t>(seeds));
  std::vector<SplitReport> supervised(static_cast<std::size_t>(seeds));
  parallel_for_chunks(static_cast<std::size_t>(seeds), [&](std::size_t s) {
    const std::uint64_t run_seed = derive_seed(config.seed, s);
    const DiscreteData train = sample_discrete_dataset(
        config, DiscreteSplit::kTrain, config.n_train, derive_seed(run_seed, 0));
    const std::uint64_t eval_seed = derive_seed(run_seed, 1);

    const LinearClassifier sup =
        train_supervised(train, config.num_classes, settings.train);
    const DualHeadClassifier con = train_contrastive_perfect(
        train, config.num_classes, config.num_colors, settings.train);
    supervised[s] = evaluate_splits(sup, config, settings.n_test, eval_seed);
    contrastive[s] = evaluate_splits(con, config, settings.n_test, eval_seed);
  });
  return {summarize("Contrastive", std::move(contrastive)),
          summarize("Supervised", std::move(supervised))};
}

std::string discrete_csv_header() {
  return "k,n,p_inv,p_spu,method,rand,rand_std,rev,rev_std,rest,rest_std";
}

std::string discrete_csv_row(const DiscreteConfig& config,
                             const MethodSummary& summary) {
  std::string row = std::to_string(config.num_classes) + "," +
                    std::to_string(config.n_train) + "," + num(config.p_inv) +
                    "," + num(config.p_spu) + "," + summary.method + "," +
                    pct(summary.rand_mean) + "," + pct(summary.rand_std) + "," +
                    pct(summary.rev_mean) + "," + pct(summary.rev_std) + ",";
  if (summary.rest_mean) {
    row += pct(*summary.rest_mean) + "," + pct(*summary.rest_std);
  } else {
    row += "n/a,n/a";
  }
  return row;
}

}  // namespace spurious_lens
