#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spurious_lens {

enum class Group { kEasy, kHard, kUnassigned };

const char* to_string(Group group);

struct PredictionRecord {
  std::string sample_id;
  std::string true_label;
  Group group = Group::kUnassigned;
  std::string background;
  std::vector<std::string> ranked_predictions;  // top-K, best first

  bool hit_at(int k) const;
};

// CSV header: sample_id,true_label,group,background,pred_1,...,pred_K.
// Trailing pred cells may be empty when a model returned fewer than K labels.
std::vector<PredictionRecord> parse_predictions(std::istream& in,
                                                const std::string& source);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

// Top-k accuracy over records whose true label is `label`; nullopt if none.
// Throws kInvalidK for k < 1.
std::optional<double> class_accuracy(const std::vector<PredictionRecord>& records,
                                     const std::string& label, int k);

// Unweighted mean of class accuracies over the classes present.
double balanced_accuracy(const std::vector<PredictionRecord>& records, int k);
// correct / total.
double plain_accuracy(const std::vector<PredictionRecord>& records, int k);

struct ClassGroupMetrics {
  std::optional<double> easy;
  std::optional<double> hard;
  std::optional<double> drop;  // easy - hard, absent unless both groups exist
  std::size_t n_easy = 0;
  std::size_t n_hard = 0;
};

struct EvalReport {
  int k = 1;
  std::map<std::string, ClassGroupMetrics> per_class;
  // Averages over classes that have both groups; classes with one group are
  // listed in `incomplete_classes` and excluded.
  double balanced_easy = 0.0;
  double balanced_hard = 0.0;
  double balanced_drop = 0.0;
  double plain_easy = 0.0;
  double plain_hard = 0.0;
  std::vector<std::string> incomplete_classes;
};

// Every record must be easy or hard; kInvalidConfig otherwise.
EvalReport group_report(const std::vector<PredictionRecord>& records, int k);

struct BackgroundStat {
  std::string background;
  std::size_t correct = 0;
  std::size_t count = 0;
  double accuracy = 0.0;
};

struct ClassSplit {
  std::string label;
  std::string easy_background;
  std::string hard_background;
  double gap_pp = 0.0;
  std::vector<BackgroundStat> backgrounds;  // qualifying backgrounds, by name
};

struct GroupSplit {
  double threshold_pp = 5.0;
  int min_count = 20;
  std::vector<ClassSplit> flagged;
  std::vector<std::string> unflagged;
  std::vector<std::string> notices;  // classes skipped, with the reason
};

// Strictly greater than the threshold, after a 1e-9 pp allowance for the
// rounding in percentage arithmetic.
inline constexpr double kThresholdSlackPp = 1e-9;

// Per class, top-1 accuracy per background with at least min_count records;
// flags the class when max - min exceeds threshold_pp. Ties resolve to the
// lexicographically smallest background name.
GroupSplit discover_spurious(const std::vector<PredictionRecord>& records,
                             double threshold_pp, int min_count = 20);

// Marks records of flagged classes easy/hard by background; all other records
// become unassigned.
std::vector<PredictionRecord> assign_groups(std::vector<PredictionRecord> records,
                                            const GroupSplit& split);

struct SimilarityTable {
  std::vector<std::string> candidates;
  std::vector<std::string> sample_ids;
  std::vector<std::vector<double>> scores;  // one row per sample
};

// CSV header: sample_id,<candidate_1>,...,<candidate_C>.
SimilarityTable parse_similarities(std::istream& in, const std::string& source);
SimilarityTable load_similarities(const std::filesystem::path& path);

struct RankedLabel {
  std::string label;
  double mean_score = 0.0;
};

// Top-k candidates by mean score over all samples of one class.
std::vector<RankedLabel> confusing_labels(const SimilarityTable& table, int k = 20);

enum class FitTransform { kLinear, kProbit };

const char* to_string(FitTransform transform);
FitTransform fit_transform_from_string(const std::string& name);

struct AccuracyPoint {
  double easy = 0.0;  // x
  double hard = 0.0;  // y
  std::string name;
};

struct FitLine {
  double slope = 0.0;
  double intercept = 0.0;
  FitTransform transform = FitTransform::kLinear;
  double residual_rms = 0.0;
};

// Coordinates in the fit space (identity or Phi^{-1}).
std::pair<double, double> transform_point(const AccuracyPoint& point,
                                          FitTransform transform);

// OLS of hard on easy. kDegenerateFit with < 2 points or identical x;
// kDomain for probit with an accuracy outside (0, 1).
FitLine effective_robustness_fit(const std::vector<AccuracyPoint>& points,
                                 FitTransform transform);

// Vertical distance of a point above the fitted trend, in the fit space.
double effective_robustness(const FitLine& fit, const AccuracyPoint& point);

// CSV with columns easy_acc and hard_acc (fractions), optional model column.
std::vector<AccuracyPoint> parse_points(std::istream& in, const std::string& source);
std::vector<AccuracyPoint> load_points(const std::filesystem::path& path);

// "backbone,pretrain,easy,hard,drop" with two-decimal percentages.
std::string table_row(const EvalReport& report, const std::string& backbone,
                      const std::string& pretrain);

std::string format_percent(double fraction);

}  // namespace spurious_lens
