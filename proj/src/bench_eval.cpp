#include "spurious_lens/bench_eval.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "spurious_lens/error.hpp"
#include "spurious_lens/theory.hpp"

namespace spurious_lens {
namespace {

const std::vector<std::string> kPredictionColumns = {"sample_id", "true_label",
                                                     "group", "background"};

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  if (line.empty()) cells.emplace_back();
  return cells;
}

// Reads the next line, stripping CR and a leading UTF-8 BOM on line 1.
bool next_line(std::istream& in, std::string& line, std::size_t& line_no) {
  if (!std::getline(in, line)) return false;
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  return true;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

double parse_real(const std::string& cell, const std::string& source,
                  std::size_t line, const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (cell.empty() || end != begin + cell.size() || errno == ERANGE ||
      !std::isfinite(v)) {
    throw ParseError(source, line,
                     "column '" + column + "' is not a finite number: '" + cell + "'");
  }
  return v;
}

Group parse_group(const std::string& cell, const std::string& source,
                  std::size_t line) {
  if (cell == "easy") return Group::kEasy;
  if (cell == "hard") return Group::kHard;
  if (cell == "unassigned") return Group::kUnassigned;
  throw ParseError(source, line,
                   "group must be easy, hard or unassigned, got '" + cell + "'");
}

void check_k(int k) {
  if (k < 1) {
    throw Error(ErrorCode::kInvalidK, "k must be >= 1, got " + std::to_string(k));
  }
}

struct Tally {
  std::size_t hit = 0;
  std::size_t total = 0;
  double rate() const { return double(hit) / double(total); }
};

std::map<std::string, Tally> tally_by_class(
    const std::vector<PredictionRecord>& records, int k) {
  std::map<std::string, Tally> by_class;
  for (const auto& r : records) {
    Tally& t = by_class[r.true_label];
    ++t.total;
    t.hit += r.hit_at(k);
  }
  return by_class;
}

}  // namespace

const char* to_string(Group group) {
  switch (group) {
    case Group::kEasy: return "easy";
    case Group::kHard: return "hard";
    case Group::kUnassigned: return "unassigned";
  }
  return "unassigned";
}

bool PredictionRecord::hit_at(int k) const {
  const auto limit = std::min<std::size_t>(static_cast<std::size_t>(k),
                                           ranked_predictions.size());
  return std::find(ranked_predictions.begin(),
                   ranked_predictions.begin() + static_cast<std::ptrdiff_t>(limit),
                   true_label) !=
         ranked_predictions.begin() + static_cast<std::ptrdiff_t>(limit);
}

std::vector<PredictionRecord> parse_predictions(std::istream& in,
                                                const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_line(in, line, line_no)) {
    throw ParseError(source, 1, "missing header row");
  }
  const std::vector<std::string> header = split_commas(line);
  if (header.size() < kPredictionColumns.size() + 1) {
    throw ParseError(source, 1,
                     "header needs sample_id,true_label,group,background,pred_1[,...]");
  }
  for (std::size_t c = 0; c < kPredictionColumns.size(); ++c) {
    if (header[c] != kPredictionColumns[c]) {
      throw ParseError(source, 1,
                       "expected column '" + kPredictionColumns[c] + "', found '" +
                           header[c] + "'");
    }
  }
  for (std::size_t c = kPredictionColumns.size(); c < header.size(); ++c) {
    const std::string expected =
        "pred_" + std::to_string(c - kPredictionColumns.size() + 1);
    if (header[c] != expected) {
      throw ParseError(source, 1,
                       "expected column '" + expected + "', found '" + header[c] + "'");
    }
  }

  std::vector<PredictionRecord> records;
  std::unordered_map<std::string, std::size_t> first_line;
  while (next_line(in, line, line_no)) {
    if (blank(line)) continue;
    const std::vector<std::string> cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(header.size()) +
                           " columns, found " + std::to_string(cells.size()));
    }
    PredictionRecord rec;
    rec.sample_id = cells[0];
    rec.true_label = cells[1];
    rec.group = parse_group(cells[2], source, line_no);
    rec.background = cells[3];
    if (rec.sample_id.empty()) throw ParseError(source, line_no, "empty sample_id");
    if (rec.true_label.empty()) throw ParseError(source, line_no, "empty true_label");

    bool ended = false;
    for (std::size_t c = kPredictionColumns.size(); c < cells.size(); ++c) {
      const std::string& pred = cells[c];
      if (pred.empty()) {
        ended = true;
        continue;
      }
      if (ended) {
        throw ParseError(source, line_no,
                         "non-empty " + header[c] + " after an empty prediction");
      }
      if (std::find(rec.ranked_predictions.begin(), rec.ranked_predictions.end(),
                    pred) != rec.ranked_predictions.end()) {
        throw ParseError(source, line_no, "duplicate prediction '" + pred + "'");
      }
      rec.ranked_predictions.push_back(pred);
    }
    if (rec.ranked_predictions.empty()) {
      throw ParseError(source, line_no, "empty prediction list (pred_1 is blank)");
    }
    const auto [it, inserted] = first_line.emplace(rec.sample_id, line_no);
    if (!inserted) {
      throw ParseError(source, line_no,
                       "duplicate sample_id '" + rec.sample_id + "' on lines " +
                           std::to_string(it->second) + " and " +
                           std::to_string(line_no));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_predictions(in, path.string());
}

std::optional<double> class_accuracy(const std::vector<PredictionRecord>& records,
                                     const std::string& label, int k) {
  check_k(k);
  Tally t;
  for (const auto& r : records) {
    if (r.true_label != label) continue;
    ++t.total;
    t.hit += r.hit_at(k);
  }
  if (t.total == 0) return std::nullopt;
  return t.rate();
}

double balanced_accuracy(const std::vector<PredictionRecord>& records, int k) {
  check_k(k);
  if (records.empty()) {
    throw Error(ErrorCode::kInsufficientData, "balanced accuracy of no records");
  }
  const auto by_class = tally_by_class(records, k);
  double sum = 0.0;
  for (const auto& [label, t] : by_class) sum += t.rate();
  return sum / double(by_class.size());
}

double plain_accuracy(const std::vector<PredictionRecord>& records, int k) {
  check_k(k);
  if (records.empty()) {
    throw Error(ErrorCode::kInsufficientData, "plain accuracy of no records");
  }
  std::size_t hit = 0;
  for (const auto& r : records) hit += r.hit_at(k);
  return double(hit) / double(records.size());
}

EvalReport group_report(const std::vector<PredictionRecord>& records, int k) {
  check_k(k);
  std::vector<PredictionRecord> easy, hard;
  for (const auto& r : records) {
    if (r.group == Group::kUnassigned) {
      throw Error(ErrorCode::kInvalidConfig,
                  "record '" + r.sample_id + "' is not assigned to easy or hard");
    }
    (r.group == Group::kEasy ? easy : hard).push_back(r);
  }
  if (easy.empty() || hard.empty()) {
    throw Error(ErrorCode::kInsufficientData,
                "group report needs both easy and hard records");
  }

  EvalReport report;
  report.k = k;
  for (const auto& [label, t] : tally_by_class(easy, k)) {
    report.per_class[label].easy = t.rate();
    report.per_class[label].n_easy = t.total;
  }
  for (const auto& [label, t] : tally_by_class(hard, k)) {
    report.per_class[label].hard = t.rate();
    report.per_class[label].n_hard = t.total;
  }

  double sum_easy = 0.0, sum_hard = 0.0;
  std::size_t complete = 0;
  for (auto& [label, m] : report.per_class) {
    if (m.easy && m.hard) {
      m.drop = *m.easy - *m.hard;
      sum_easy += *m.easy;
      sum_hard += *m.hard;
      ++complete;
    } else {
      report.incomplete_classes.push_back(label);
    }
  }
  if (complete == 0) {
    throw Error(ErrorCode::kInsufficientData,
                "no class has records in both the easy and hard groups");
  }
  report.balanced_easy = sum_easy / double(complete);
  report.balanced_hard = sum_hard / double(complete);
  report.balanced_drop = report.balanced_easy - report.balanced_hard;
  report.plain_easy = plain_accuracy(easy, k);
  report.plain_hard = plain_accuracy(hard, k);
  return report;
}

GroupSplit discover_spurious(const std::vector<PredictionRecord>& records,
                             double threshold_pp, int min_count) {
  if (!(threshold_pp > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "threshold_pp must be > 0");
  }
  if (min_count < 1) {
    throw Error(ErrorCode::kInvalidConfig, "min_count must be >= 1");
  }
  std::map<std::string, std::map<std::string, Tally>> by_class;
  for (const auto& r : records) {
    Tally& t = by_class[r.true_label][r.background];
    ++t.total;
    t.hit += r.hit_at(1);
  }

  GroupSplit split;
  split.threshold_pp = threshold_pp;
  split.min_count = min_count;
  for (const auto& [label, backgrounds] : by_class) {
    ClassSplit cls;
    cls.label = label;
    for (const auto& [bg, t] : backgrounds) {
      if (t.total < static_cast<std::size_t>(min_count)) continue;
      cls.backgrounds.push_back(BackgroundStat{bg, t.hit, t.total, t.rate()});
    }
    if (cls.backgrounds.size() < 2) {
      split.notices.push_back("class '" + label + "' skipped: " +
                              std::to_string(cls.backgrounds.size()) +
                              " background(s) with at least " +
                              std::to_string(min_count) + " records");
      continue;
    }
    const BackgroundStat* best = &cls.backgrounds.front();
    const BackgroundStat* worst = &cls.backgrounds.front();
    for (const auto& b : cls.backgrounds) {
      if (b.accuracy > best->accuracy) best = &b;
      if (b.accuracy < worst->accuracy) worst = &b;
    }
    cls.easy_background = best->background;
    cls.hard_background = worst->background;
    cls.gap_pp = 100.0 * (best->accuracy - worst->accuracy);
    if (cls.gap_pp > threshold_pp + kThresholdSlackPp) {
      split.flagged.push_back(std::move(cls));
    } else {
      split.unflagged.push_back(label);
    }
  }
  return split;
}

std::vector<PredictionRecord> assign_groups(std::vector<PredictionRecord> records,
                                            const GroupSplit& split) {
  std::map<std::string, const ClassSplit*> by_label;
  for (const auto& cls : split.flagged) by_label[cls.label] = &cls;
  for (auto& r : records) {
    r.group = Group::kUnassigned;
    const auto it = by_label.find(r.true_label);
    if (it == by_label.end()) continue;
    if (r.background == it->second->easy_background) r.group = Group::kEasy;
    if (r.background == it->second->hard_background) r.group = Group::kHard;
  }
  return records;
}

SimilarityTable parse_similarities(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_line(in, line, line_no)) {
    throw ParseError(source, 1, "missing header row");
  }
  const std::vector<std::string> header = split_commas(line);
  if (header.size() < 2 || header[0] != "sample_id") {
    throw ParseError(source, 1, "header needs sample_id,<candidate_1>,...");
  }
  SimilarityTable table;
  std::set<std::string> seen;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].empty()) throw ParseError(source, 1, "empty candidate label");
    if (!seen.insert(header[c]).second) {
      throw ParseError(source, 1, "duplicate candidate '" + header[c] + "'");
    }
    table.candidates.push_back(header[c]);
  }
  while (next_line(in, line, line_no)) {
    if (blank(line)) continue;
    const std::vector<std::string> cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw ParseError(source, line_no,
                       "ragged row: expected " + std::to_string(header.size()) +
                           " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      row.push_back(parse_real(cells[c], source, line_no, header[c]));
    }
    table.sample_ids.push_back(cells[0]);
    table.scores.push_back(std::move(row));
  }
  return table;
}

SimilarityTable load_similarities(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_similarities(in, path.string());
}

std::vector<RankedLabel> confusing_labels(const SimilarityTable& table, int k) {
  const std::size_t c = table.candidates.size();
  if (k < 1 || static_cast<std::size_t>(k) > c) {
    throw Error(ErrorCode::kInvalidK,
                "k must lie in [1, " + std::to_string(c) + "], got " +
                    std::to_string(k));
  }
  if (table.scores.empty()) {
    throw Error(ErrorCode::kInsufficientData, "no samples to average over");
  }
  std::vector<RankedLabel> ranked(c);
  for (std::size_t j = 0; j < c; ++j) ranked[j].label = table.candidates[j];
  for (std::size_t i = 0; i < table.scores.size(); ++i) {
    if (table.scores[i].size() != c) {
      throw Error(ErrorCode::kShapeMismatch,
                  "ragged score row " + std::to_string(i) + ": expected " +
                      std::to_string(c) + " scores");
    }
    for (std::size_t j = 0; j < c; ++j) ranked[j].mean_score += table.scores[i][j];
  }
  for (auto& r : ranked) r.mean_score /= double(table.scores.size());
  std::sort(ranked.begin(), ranked.end(),
            [](const RankedLabel& a, const RankedLabel& b) {
              if (a.mean_score != b.mean_score) return a.mean_score > b.mean_score;
              return a.label < b.label;
            });
  ranked.resize(static_cast<std::size_t>(k));
  return ranked;
}

const char* to_string(FitTransform transform) {
  return transform == FitTransform::kLinear ? "linear" : "probit";
}

FitTransform fit_transform_from_string(const std::string& name) {
  if (name == "linear") return FitTransform::kLinear;
  if (name == "probit") return FitTransform::kProbit;
  throw Error(ErrorCode::kInvalidConfig,
              "transform must be linear or probit, got '" + name + "'");
}

std::pair<double, double> transform_point(const AccuracyPoint& point,
                                          FitTransform transform) {
  if (transform == FitTransform::kLinear) return {point.easy, point.hard};
  auto probit = [&](double acc) {
    if (!(acc > 0.0 && acc < 1.0)) {
      throw Error(ErrorCode::kDomain,
                  "probit transform needs accuracies in (0, 1), got " +
                      std::to_string(acc) +
                      (point.name.empty() ? "" : " for '" + point.name + "'"));
    }
    return std_normal_quantile(acc);
  };
  return {probit(point.easy), probit(point.hard)};
}

FitLine effective_robustness_fit(const std::vector<AccuracyPoint>& points,
                                 FitTransform transform) {
  if (points.size() < 2) {
    throw Error(ErrorCode::kDegenerateFit, "a line fit needs at least 2 points");
  }
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    const auto [x, y] = transform_point(p, transform);
    xs.push_back(x);
    ys.push_back(y);
  }
  const double n = double(xs.size());
  double x_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x_mean += xs[i];
    y_mean += ys[i];
  }
  x_mean /= n;
  y_mean /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - x_mean) * (xs[i] - x_mean);
    sxy += (xs[i] - x_mean) * (ys[i] - y_mean);
  }
  if (!(sxx > 0.0)) {
    throw Error(ErrorCode::kDegenerateFit,
                "all points share the same x value; the slope is undefined");
  }
  FitLine fit;
  fit.transform = transform;
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  return fit;
}

double effective_robustness(const FitLine& fit, const AccuracyPoint& point) {
  const auto [x, y] = transform_point(point, fit.transform);
  return y - (fit.intercept + fit.slope * x);
}

std::vector<AccuracyPoint> parse_points(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_line(in, line, line_no)) {
    throw ParseError(source, 1, "missing header row");
  }
  const std::vector<std::string> header = split_commas(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto easy_col = column("easy_acc");
  const auto hard_col = column("hard_acc");
  const auto name_col = column("model");
  if (!easy_col || !hard_col) {
    throw ParseError(source, 1, "header needs easy_acc and hard_acc columns");
  }
  std::vector<AccuracyPoint> points;
  while (next_line(in, line, line_no)) {
    if (blank(line)) continue;
    const std::vector<std::string> cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(header.size()) +
                           " columns, found " + std::to_string(cells.size()));
    }
    AccuracyPoint p;
    p.easy = parse_real(cells[*easy_col], source, line_no, "easy_acc");
    p.hard = parse_real(cells[*hard_col], source, line_no, "hard_acc");
    if (name_col) p.name = cells[*name_col];
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<AccuracyPoint> load_points(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_points(in, path.string());
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

std::string table_row(const EvalReport& report, const std::string& backbone,
                      const std::string& pretrain) {
  return backbone + "," + pretrain + "," + format_percent(report.balanced_easy) +
         "," + format_percent(report.balanced_hard) + "," +
         format_percent(report.balanced_drop);
}

}  // namespace spurious_lens
