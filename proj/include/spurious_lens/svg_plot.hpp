#pragma once

#include <string>
#include <vector>

#include "spurious_lens/bench_eval.hpp"

namespace spurious_lens {

// Static scatter of (easy, hard) accuracy points in the fit space, with the
// fitted trend (id "fit-line") and the dashed y = x reference
// (id "reference-line"). Self-contained: no scripts, fonts or external links.
std::string render_fit_svg(const std::vector<AccuracyPoint>& points,
                           const FitLine& fit);

std::string xml_escape(const std::string& text);

}  // namespace spurious_lens
