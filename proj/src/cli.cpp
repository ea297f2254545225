#include "spurious_lens/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "spurious_lens/bench_eval.hpp"
#include "spurious_lens/clip_linear.hpp"
#include "spurious_lens/discrete_sim.hpp"
#include "spurious_lens/error.hpp"
#include "spurious_lens/json_io.hpp"
#include "spurious_lens/parallel.hpp"
#include "spurious_lens/svg_plot.hpp"
#include "spurious_lens/synthetic_data.hpp"
#include "spurious_lens/theory.hpp"
#include "spurious_lens/version.hpp"

namespace spurious_lens {
namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
  if (!out) throw ParseError(path, 0, "cannot write file");
}

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Every run writes <out>.manifest.json. The digest covers the subcommand and
// its canonicalized inputs; the timestamp is not part of it.
struct Manifest {
  std::string subcommand;
  Json inputs;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;

  void write(const std::string& out_path) const {
    const Json digest_source{{"subcommand", subcommand}, {"inputs", inputs}};
    const Json manifest{{"subcommand", subcommand},
                        {"config_digest", sha256_hex(digest_source.dump())},
                        {"seed", seed},
                        {"toolkit_version", kVersion},
                        {"outputs", outputs},
                        {"inputs", inputs},
                        {"timestamp", utc_timestamp()}};
    write_file(out_path + ".manifest.json", manifest.dump(2) + "\n");
  }
};

Json file_input(const std::string& path) {
  return Json{{"path_name", fs::path(path).filename().string()},
              {"sha256", sha256_hex(read_file(path))}};
}

std::string pct_or_na(const std::optional<double>& v) {
  return v ? format_percent(*v) : "n/a";
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string config, out;
  std::size_t mc = 100000;
  std::uint64_t seed = 0;
  double tol = 0.01;
};

int cmd_verify_theorem(const VerifyArgs& a, std::ostream& out) {
  const GenerativeConfig config = generative_config_from_json(
      parse_json_text(read_file(a.config), a.config), a.config);
  const VerificationReport report = verify_theorem(config, a.mc, a.seed, a.tol);
  write_file(a.out, to_json(report).dump(2) + "\n");
  Manifest{"verify-theorem",
           Json{{"config", to_json(config)}, {"mc", a.mc}, {"tol", a.tol}},
           a.seed,
           {a.out}}
      .write(a.out);

  out << "parameters\n"
      << "  mode       " << to_string(config.mode) << '\n'
      << "  sigma_inv  " << config.sigma_inv << '\n'
      << "  sigma_spu  " << config.sigma_spu << '\n'
      << "  mu_spu     " << config.mu_spu << '\n'
      << "  p_spu      " << config.p_spu << '\n'
      << "kappa\n"
      << "  kappa1     " << fixed(report.bounds.kappa1, 5) << '\n'
      << "  kappa2     " << fixed(report.bounds.kappa2, 5) << '\n'
      << "bound vs monte-carlo (" << report.mc_samples << " samples)\n"
      << "  err(a!=y)  bound " << fixed(report.bounds.err_lower_conflicting, 4)
      << "  mc " << fixed(report.mc_err_conflicting, 4) << " +- "
      << fixed(report.stderr_conflicting, 4) << '\n'
      << "  acc(a=y)   bound " << fixed(report.bounds.acc_lower_aligned, 4)
      << "  mc " << fixed(report.mc_acc_aligned, 4) << " +- "
      << fixed(report.stderr_aligned, 4) << '\n';
  if (report.lemma_gap) {
    out << "  lemma_gap  " << fixed(*report.lemma_gap, 5) << '\n';
  }
  if (report.low_power) out << "  low-power subgroup (< 100 samples)\n";
  out << "pass " << (report.pass ? "yes" : "no") << '\n';
  return report.pass ? kExitOk : kExitCheckFailed;
}

struct SimulateGaussianArgs {
  std::string config, out, matrix_csv, dataset_csv;
  std::uint64_t seed = 0;
  int n_test = 10000;
};

int cmd_simulate_gaussian(const SimulateGaussianArgs& a, std::ostream& out) {
  const GenerativeConfig config = generative_config_from_json(
      parse_json_text(read_file(a.config), a.config), a.config);
  if (a.n_test < 1) throw Error(ErrorCode::kInvalidConfig, "--n-test must be >= 1");

  const SyntheticDataset train = sample_dataset(config, derive_seed(a.seed, 1));
  const AlignmentMatrix m = empirical_minimizer(train, config.rho);
  GenerativeConfig test_config = ood_config(config);
  test_config.n = std::max(2, a.n_test);
  const SyntheticDataset test = sample_dataset(
      test_config, derive_seed(a.seed, 2), train.dict_image, train.dict_text);
  const SubgroupReport groups =
      subgroup_accuracy(m, test, make_prompts(train.dict_text));

  const Eigen::Matrix2d lemma = lemma_matrix(config);
  const Eigen::Matrix2d population = population_matrix(config);
  const Eigen::MatrixXd scaled = config.rho * m.entries;
  const Eigen::MatrixXd di = train.dict_image.entries;
  const Eigen::MatrixXd dt = train.dict_text.entries;
  const double lemma_gap = (scaled - di * lemma * dt.transpose()).norm() / lemma.norm();
  const double population_gap =
      (scaled - di * population * dt.transpose()).norm() / population.norm();

  auto se = [](const std::optional<double>& p, std::size_t n) {
    return p && n ? std::sqrt(*p * (1.0 - *p) / double(n)) : 0.0;
  };
  Json report = to_json(groups);
  report["stderr_aligned"] = se(groups.acc_aligned, groups.n_aligned);
  report["stderr_conflicting"] = se(groups.acc_conflicting, groups.n_conflicting);
  report["n_train"] = config.n;
  report["n_test"] = test_config.n;
  report["seed"] = a.seed;
  report["lemma"] = Json{{"lemma_matrix", to_json(Eigen::MatrixXd(lemma))},
                         {"population_matrix", to_json(Eigen::MatrixXd(population))},
                         {"lemma_gap", lemma_gap},
                         {"population_gap", population_gap}};
  report["config"] = to_json(config);
  write_file(a.out, report.dump(2) + "\n");

  std::vector<std::string> outputs{a.out};
  if (!a.matrix_csv.empty()) {
    write_file(a.matrix_csv, alignment_matrix_csv(m));
    outputs.push_back(a.matrix_csv);
  }
  if (!a.dataset_csv.empty()) {
    std::ostringstream csv;
    write_dataset_csv(train, csv);
    write_file(a.dataset_csv, csv.str());
    outputs.push_back(a.dataset_csv);
  }
  Manifest{"simulate-gaussian",
           Json{{"config", to_json(config)}, {"n_test", a.n_test}},
           a.seed,
           outputs}
      .write(a.out);

  out << "subgroup       accuracy   count\n"
      << "a=y            " << pct_or_na(groups.acc_aligned) << "%   "
      << groups.n_aligned << '\n'
      << "a!=y           " << pct_or_na(groups.acc_conflicting) << "%   "
      << groups.n_conflicting << '\n'
      << "overall        " << pct_or_na(groups.acc_overall) << "%\n"
      << "lemma_gap      " << fixed(lemma_gap, 5) << '\n'
      << "population_gap " << fixed(population_gap, 5) << '\n';
  return kExitOk;
}

struct SimulateDiscreteArgs {
  std::string config, out;
  int seeds = 5;
};

int cmd_simulate_discrete(const SimulateDiscreteArgs& a, std::ostream& out) {
  const DiscreteRunConfig run = discrete_config_from_json(
      parse_json_text(read_file(a.config), a.config), a.config);
  const auto summaries = run_discrete_experiment(run.config, run.settings, a.seeds);
  std::string csv = discrete_csv_header() + "\n";
  for (const auto& s : summaries) csv += discrete_csv_row(run.config, s) + "\n";
  write_file(a.out, csv);
  Manifest{"simulate-discrete", Json{{"config", to_json(run)}, {"seeds", a.seeds}},
           run.config.seed, {a.out}}
      .write(a.out);
  out << csv;
  return kExitOk;
}

struct EvalArgs {
  std::string predictions, out, table, backbone = "model", pretrain = "unknown";
  int topk = 1;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto records = load_predictions(a.predictions);
  const EvalReport report = group_report(records, a.topk);
  write_file(a.out, to_json(report).dump(2) + "\n");
  std::vector<std::string> outputs{a.out};
  if (!a.table.empty()) {
    write_file(a.table, "backbone,pretrain,easy,hard,drop\n" +
                            table_row(report, a.backbone, a.pretrain) + "\n");
    outputs.push_back(a.table);
  }
  Manifest{"eval",
           Json{{"predictions", file_input(a.predictions)},
                {"topk", a.topk},
                {"backbone", a.backbone},
                {"pretrain", a.pretrain}},
           0, outputs}
      .write(a.out);

  out << "class,easy,hard,drop\n";
  for (const auto& [label, m] : report.per_class) {
    out << label << ',' << pct_or_na(m.easy) << ',' << pct_or_na(m.hard) << ','
        << pct_or_na(m.drop) << '\n';
  }
  out << "[balanced]," << format_percent(report.balanced_easy) << ','
      << format_percent(report.balanced_hard) << ','
      << format_percent(report.balanced_drop) << '\n'
      << "[plain]," << format_percent(report.plain_easy) << ','
      << format_percent(report.plain_hard) << ','
      << format_percent(report.plain_easy - report.plain_hard) << '\n';
  return kExitOk;
}

struct DiscoverArgs {
  std::string predictions, out;
  double threshold = 5.0;
  int min_count = 20;
};

int cmd_discover(const DiscoverArgs& a, std::ostream& out, std::ostream& err) {
  const auto records = load_predictions(a.predictions);
  const GroupSplit split = discover_spurious(records, a.threshold, a.min_count);
  write_file(a.out, to_json(split).dump(2) + "\n");
  Manifest{"discover",
           Json{{"predictions", file_input(a.predictions)},
                {"threshold", a.threshold},
                {"min_count", a.min_count}},
           0, {a.out}}
      .write(a.out);
  for (const auto& notice : split.notices) err << "notice: " << notice << '\n';
  out << "class,easy,hard,gap_pp\n";
  for (const auto& cls : split.flagged) {
    out << cls.label << ',' << cls.easy_background << ',' << cls.hard_background
        << ',' << fixed(cls.gap_pp, 2) << '\n';
  }
  return kExitOk;
}

struct ConfuseArgs {
  std::string similarities, out;
  int k = 20;
};

int cmd_confuse(const ConfuseArgs& a, std::ostream& out) {
  const SimilarityTable table = load_similarities(a.similarities);
  const auto labels = confusing_labels(table, a.k);
  write_file(a.out, to_json(labels, a.k).dump(2) + "\n");
  Manifest{"confuse",
           Json{{"similarities", file_input(a.similarities)}, {"k", a.k}}, 0,
           {a.out}}
      .write(a.out);
  out << "rank,label,mean_score\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << i + 1 << ',' << labels[i].label << ',' << fixed(labels[i].mean_score, 6)
        << '\n';
  }
  return kExitOk;
}

struct FitArgs {
  std::string points, transform = "linear", svg, out;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const FitTransform transform = fit_transform_from_string(a.transform);
  const auto points = load_points(a.points);
  const FitLine fit = effective_robustness_fit(points, transform);
  Json report = to_json(fit);
  Json per_point = Json::array();
  for (const auto& p : points) {
    per_point.push_back(Json{{"model", p.name},
                             {"easy_acc", p.easy},
                             {"hard_acc", p.hard},
                             {"effective_robustness", effective_robustness(fit, p)}});
  }
  report["points"] = std::move(per_point);
  write_file(a.out, report.dump(2) + "\n");
  std::vector<std::string> outputs{a.out};
  if (!a.svg.empty()) {
    write_file(a.svg, render_fit_svg(points, fit));
    outputs.push_back(a.svg);
  }
  Manifest{"fit",
           Json{{"points", file_input(a.points)}, {"transform", a.transform}}, 0,
           outputs}
      .write(a.out);
  out << "transform " << to_string(fit.transform) << '\n'
      << "slope " << fixed(fit.slope, 6) << '\n'
      << "intercept " << fixed(fit.intercept, 6) << '\n'
      << "residual_rms " << fixed(fit.residual_rms, 6) << '\n';
  return kExitOk;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  }
  return hex.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Spurious-feature simulation and benchmark evaluation toolkit",
               "spurious-lens"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand(
      "verify-theorem", "Monte-Carlo check of the zero-shot error bounds");
  verify_cmd->add_option("--config", verify.config, "GenerativeConfig JSON")->required();
  verify_cmd->add_option("--mc", verify.mc, "Monte-Carlo test samples");
  verify_cmd->add_option("--seed", verify.seed, "Seed");
  verify_cmd->add_option("--tol", verify.tol, "Absolute tolerance");
  verify_cmd->add_option("--out", verify.out, "Report JSON path")->required();

  SimulateGaussianArgs gauss;
  auto* gauss_cmd = app.add_subcommand(
      "simulate-gaussian", "Train the linearized contrastive model and score OOD subgroups");
  gauss_cmd->add_option("--config", gauss.config, "GenerativeConfig JSON")->required();
  gauss_cmd->add_option("--seed", gauss.seed, "Seed");
  gauss_cmd->add_option("--out", gauss.out, "Report JSON path")->required();
  gauss_cmd->add_option("--n-test", gauss.n_test, "OOD test samples");
  gauss_cmd->add_option("--matrix", gauss.matrix_csv, "Write the alignment matrix CSV");
  gauss_cmd->add_option("--dataset-csv", gauss.dataset_csv, "Write the training set CSV");

  SimulateDiscreteArgs discrete;
  auto* discrete_cmd = app.add_subcommand(
      "simulate-discrete", "Supervised vs contrastive training on colored one-hot data");
  discrete_cmd->add_option("--config", discrete.config, "DiscreteConfig JSON")->required();
  discrete_cmd->add_option("--seeds", discrete.seeds, "Number of seeds");
  discrete_cmd->add_option("--out", discrete.out, "Results CSV path")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Easy/hard group accuracies and drops");
  eval_cmd->add_option("--predictions", eval.predictions, "Prediction CSV")->required();
  eval_cmd->add_option("--topk", eval.topk, "k for top-k accuracy");
  eval_cmd->add_option("--out", eval.out, "Report JSON path")->required();
  eval_cmd->add_option("--table", eval.table, "Also write a one-row table CSV");
  eval_cmd->add_option("--backbone", eval.backbone, "Table backbone column");
  eval_cmd->add_option("--pretrain", eval.pretrain, "Table pre-train dataset column");

  DiscoverArgs discover;
  auto* discover_cmd = app.add_subcommand(
      "discover", "Flag classes whose accuracy varies across backgrounds");
  discover_cmd->add_option("--predictions", discover.predictions, "Prediction CSV")
      ->required();
  discover_cmd->add_option("--threshold", discover.threshold, "Gap threshold (pp)");
  discover_cmd->add_option("--min-count", discover.min_count,
                           "Minimum records per background");
  discover_cmd->add_option("--out", discover.out, "Report JSON path")->required();

  ConfuseArgs confuse;
  auto* confuse_cmd =
      app.add_subcommand("confuse", "Select the most confusing candidate labels");
  confuse_cmd->add_option("--similarities", confuse.similarities, "Similarity CSV")
      ->required();
  confuse_cmd->add_option("--k", confuse.k, "Number of labels");
  confuse_cmd->add_option("--out", confuse.out, "Report JSON path")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Effective-robustness line fit");
  fit_cmd->add_option("--points", fit.points, "Points CSV")->required();
  fit_cmd->add_option("--transform", fit.transform, "linear or probit");
  fit_cmd->add_option("--svg", fit.svg, "SVG plot path");
  fit_cmd->add_option("--out", fit.out, "Report JSON path")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (*verify_cmd) return cmd_verify_theorem(verify, out);
    if (*gauss_cmd) return cmd_simulate_gaussian(gauss, out);
    if (*discrete_cmd) return cmd_simulate_discrete(discrete, out);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*discover_cmd) return cmd_discover(discover, out, err);
    if (*confuse_cmd) return cmd_confuse(confuse, out);
    if (*fit_cmd) return cmd_fit(fit, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return is_numerical_failure(e.code()) ? kExitNumericalFailure : kExitInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace spurious_lens
