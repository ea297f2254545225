#include "spurious_lens/json_io.hpp"

#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "spurious_lens/error.hpp"

namespace spurious_lens {
namespace {

using Reader = std::function<void(const Json&)>;

void read_object(const Json& j, const std::string& source,
                 const std::map<std::string, Reader>& readers) {
  if (!j.is_object()) throw ParseError(source, 0, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = readers.find(key);
    if (it == readers.end()) {
      throw ParseError(source, 0, "unknown config field '" + key + "'");
    }
    try {
      it->second(value);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, 0, "field '" + key + "': " + e.what());
    }
  }
}

template <typename T>
Reader number(T& slot) {
  return [&slot](const Json& v) {
    if (!v.is_number()) throw ParseError("", 0, "expected a number");
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ParseError("", 0, "expected an integer");
      if (std::is_unsigned_v<T> && !v.is_number_unsigned()) {
        throw ParseError("", 0, "expected a non-negative integer");
      }
    }
    slot = v.get<T>();
  };
}

// Rethrows nested ParseErrors with the source and key attached.
void guard(const std::string& source, const std::function<void()>& body) {
  try {
    body();
  } catch (const ParseError& e) {
    if (!e.source().empty()) throw;
    throw ParseError(source, 0, e.what());
  }
}

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offset -> line number
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
      line += text[i] == '\n';
    throw ParseError(source, line, e.what());
  }
}

GenerativeConfig generative_config_from_json(const Json& j,
                                             const std::string& source) {
  GenerativeConfig c;
  guard(source, [&] {
    read_object(j, source,
                {{"mu_inv", number(c.mu_inv)},
                 {"mu_spu", number(c.mu_spu)},
                 {"sigma_inv", number(c.sigma_inv)},
                 {"sigma_spu", number(c.sigma_spu)},
                 {"sigma_xi", number(c.sigma_xi)},
                 {"p_spu", number(c.p_spu)},
                 {"n", number(c.n)},
                 {"d_I", number(c.d_I)},
                 {"d_T", number(c.d_T)},
                 {"latent_dim", number(c.latent_dim)},
                 {"h", number(c.h)},
                 {"rho", number(c.rho)},
                 {"mode", [&c](const Json& v) {
                    if (!v.is_string()) throw ParseError("", 0, "mode must be a string");
                    c.mode = generation_mode_from_string(v.get<std::string>());
                  }}});
  });
  c.validate();
  return c;
}

Json to_json(const GenerativeConfig& c) {
  return Json{{"mu_inv", c.mu_inv},       {"mu_spu", c.mu_spu},
              {"sigma_inv", c.sigma_inv}, {"sigma_spu", c.sigma_spu},
              {"sigma_xi", c.sigma_xi},   {"p_spu", c.p_spu},
              {"n", c.n},                 {"d_I", c.d_I},
              {"d_T", c.d_T},             {"latent_dim", c.latent_dim},
              {"h", c.h},                 {"rho", c.rho},
              {"mode", to_string(c.mode)}};
}

DiscreteRunConfig discrete_config_from_json(const Json& j, const std::string& source) {
  DiscreteRunConfig run;
  auto& c = run.config;
  auto& s = run.settings;
  guard(source, [&] {
    read_object(j, source,
                {{"num_classes", number(c.num_classes)},
                 {"p_inv", number(c.p_inv)},
                 {"p_spu", number(c.p_spu)},
                 {"n_train", number(c.n_train)},
                 {"num_colors", number(c.num_colors)},
                 {"biased_colors", [&c](const Json& v) {
                    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
                        !v[1].is_number_integer()) {
                      throw ParseError("", 0, "biased_colors must be two integers");
                    }
                    c.biased_colors = {v[0].get<int>(), v[1].get<int>()};
                  }},
                 {"feature_noise", number(c.feature_noise)},
                 {"seed", number(c.seed)},
                 {"epochs", number(s.train.epochs)},
                 {"step_size", number(s.train.step_size)},
                 {"n_test", number(s.n_test)}});
  });
  c.validate();
  if (s.train.epochs < 1 || !(s.train.step_size > 0.0) || s.n_test < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                "epochs, step_size and n_test must be positive");
  }
  return run;
}

Json to_json(const DiscreteRunConfig& run) {
  const auto& c = run.config;
  return Json{{"num_classes", c.num_classes},
              {"p_inv", c.p_inv},
              {"p_spu", c.p_spu},
              {"n_train", c.n_train},
              {"num_colors", c.num_colors},
              {"biased_colors", {c.biased_colors[0], c.biased_colors[1]}},
              {"feature_noise", c.feature_noise},
              {"seed", c.seed},
              {"epochs", run.settings.train.epochs},
              {"step_size", run.settings.train.step_size},
              {"n_test", run.settings.n_test}};
}

Json to_json(const TheoryBounds& b) {
  return Json{{"kappa1", b.kappa1},
              {"kappa2", b.kappa2},
              {"err_lower_conflicting", b.err_lower_conflicting},
              {"acc_lower_aligned", b.acc_lower_aligned}};
}

Json to_json(const VerificationReport& r) {
  return Json{{"mode", to_string(r.config.mode)},
              {"config", to_json(r.config)},
              {"seed", r.seed},
              {"bounds", to_json(r.bounds)},
              {"mc_err_conflicting", r.mc_err_conflicting},
              {"mc_acc_aligned", r.mc_acc_aligned},
              {"mc_samples", r.mc_samples},
              {"n_aligned", r.n_aligned},
              {"n_conflicting", r.n_conflicting},
              {"mc_stderr", {r.stderr_conflicting, r.stderr_aligned}},
              {"lemma_gap", optional_number(r.lemma_gap)},
              {"population_gap", optional_number(r.population_gap)},
              {"low_power", r.low_power},
              {"tol", r.tol},
              {"pass", r.pass}};
}

Json to_json(const SubgroupReport& r) {
  return Json{{"acc_overall", optional_number(r.acc_overall)},
              {"acc_aligned", optional_number(r.acc_aligned)},
              {"acc_conflicting", optional_number(r.acc_conflicting)},
              {"n_aligned", r.n_aligned},
              {"n_conflicting", r.n_conflicting}};
}

Json to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const EvalReport& r) {
  Json classes = Json::array();
  for (const auto& [label, m] : r.per_class) {
    classes.push_back(Json{{"label", label},
                           {"easy", optional_number(m.easy)},
                           {"hard", optional_number(m.hard)},
                           {"drop", optional_number(m.drop)},
                           {"n_easy", m.n_easy},
                           {"n_hard", m.n_hard}});
  }
  return Json{{"k", r.k},
              {"per_class", std::move(classes)},
              {"dataset",
               {{"balanced_easy", r.balanced_easy},
                {"balanced_hard", r.balanced_hard},
                {"balanced_drop", r.balanced_drop},
                {"plain_easy", r.plain_easy},
                {"plain_hard", r.plain_hard}}},
              {"incomplete_classes", r.incomplete_classes}};
}

Json to_json(const GroupSplit& s) {
  Json flagged = Json::array();
  for (const auto& cls : s.flagged) {
    Json bgs = Json::array();
    for (const auto& b : cls.backgrounds) {
      bgs.push_back(Json{{"background", b.background},
                         {"correct", b.correct},
                         {"count", b.count},
                         {"accuracy", b.accuracy}});
    }
    flagged.push_back(Json{{"label", cls.label},
                           {"easy_background", cls.easy_background},
                           {"hard_background", cls.hard_background},
                           {"gap_pp", cls.gap_pp},
                           {"backgrounds", std::move(bgs)}});
  }
  return Json{{"threshold_pp", s.threshold_pp},
              {"min_count", s.min_count},
              {"flagged", std::move(flagged)},
              {"unflagged", s.unflagged},
              {"notices", s.notices}};
}

Json to_json(const std::vector<RankedLabel>& labels, int k) {
  Json ranked = Json::array();
  for (const auto& l : labels) {
    ranked.push_back(Json{{"label", l.label}, {"mean_score", l.mean_score}});
  }
  return Json{{"k", k}, {"labels", std::move(ranked)}};
}

Json to_json(const FitLine& f) {
  return Json{{"slope", f.slope},
              {"intercept", f.intercept},
              {"transform", to_string(f.transform)},
              {"residual_rms", f.residual_rms}};
}

std::string alignment_matrix_csv(const AlignmentMatrix& m) {
  std::ostringstream out;
  out << "# " << m.image_dim() << ',' << m.text_dim() << '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < m.image_dim(); ++r) {
    for (Eigen::Index c = 0; c < m.text_dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m.entries(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace spurious_lens
