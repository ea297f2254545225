#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "spurious_lens/bench_eval.hpp"
#include "spurious_lens/clip_linear.hpp"
#include "spurious_lens/discrete_sim.hpp"
#include "spurious_lens/synthetic_data.hpp"
#include "spurious_lens/theory.hpp"

namespace spurious_lens {

using Json = nlohmann::ordered_json;

// Strict parsing: unknown keys and wrong types are ParseErrors naming the key;
// missing keys keep their defaults. The parsed config is then validated.
GenerativeConfig generative_config_from_json(const Json& j,
                                             const std::string& source);
Json to_json(const GenerativeConfig& config);

struct DiscreteRunConfig {
  DiscreteConfig config;
  DiscreteRunSettings settings;
};
DiscreteRunConfig discrete_config_from_json(const Json& j, const std::string& source);
Json to_json(const DiscreteRunConfig& run);

// Parses text as JSON; syntax errors become ParseErrors with the line number.
Json parse_json_text(const std::string& text, const std::string& source);

Json to_json(const TheoryBounds& bounds);
Json to_json(const VerificationReport& report);
Json to_json(const SubgroupReport& report);
Json to_json(const Eigen::MatrixXd& matrix);
Json to_json(const EvalReport& report);
Json to_json(const GroupSplit& split);
Json to_json(const std::vector<RankedLabel>& labels, int k);
Json to_json(const FitLine& fit);

// Row-major CSV with a "# rows,cols" header line.
std::string alignment_matrix_csv(const AlignmentMatrix& m);

}  // namespace spurious_lens
