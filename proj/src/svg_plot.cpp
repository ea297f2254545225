#include "spurious_lens/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace spurious_lens {
namespace {

constexpr double kSize = 480.0;
constexpr double kMargin = 60.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

struct Frame {
  double lo = 0.0;
  double hi = 1.0;

  double px(double x) const {
    return kMargin + (x - lo) / (hi - lo) * (kSize - 2 * kMargin);
  }
  double py(double y) const {
    return kSize - kMargin - (y - lo) / (hi - lo) * (kSize - 2 * kMargin);
  }
};

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_fit_svg(const std::vector<AccuracyPoint>& points,
                           const FitLine& fit) {
  std::vector<std::pair<double, double>> coords;
  for (const auto& p : points) coords.push_back(transform_point(p, fit.transform));

  Frame frame;
  if (fit.transform == FitTransform::kProbit) {
    double lo = coords.front().first, hi = lo;
    for (const auto& [x, y] : coords) {
      lo = std::min({lo, x, y});
      hi = std::max({hi, x, y});
    }
    frame.lo = std::floor((lo - 0.25) * 4.0) / 4.0;
    frame.hi = std::ceil((hi + 0.25) * 4.0) / 4.0;
  }
  const bool probit = fit.transform == FitTransform::kProbit;
  const std::string x_label = probit ? "probit(easy accuracy)" : "easy accuracy";
  const std::string y_label = probit ? "probit(hard accuracy)" : "hard accuracy";

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize
      << "\" height=\"" << kSize << "\" viewBox=\"0 0 " << kSize << ' ' << kSize
      << "\">\n"
      << "  <defs><clipPath id=\"plot-area\"><rect x=\"" << kMargin << "\" y=\""
      << kMargin << "\" width=\"" << kSize - 2 * kMargin << "\" height=\""
      << kSize - 2 * kMargin << "\"/></clipPath></defs>\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Axes and ticks.
  svg << "  <g id=\"axes\" stroke=\"black\" stroke-width=\"1\" font-size=\"11\" "
         "font-family=\"sans-serif\">\n"
      << "    <line x1=\"" << fmt(frame.px(frame.lo)) << "\" y1=\""
      << fmt(frame.py(frame.lo)) << "\" x2=\"" << fmt(frame.px(frame.hi))
      << "\" y2=\"" << fmt(frame.py(frame.lo)) << "\"/>\n"
      << "    <line x1=\"" << fmt(frame.px(frame.lo)) << "\" y1=\""
      << fmt(frame.py(frame.lo)) << "\" x2=\"" << fmt(frame.px(frame.lo))
      << "\" y2=\"" << fmt(frame.py(frame.hi)) << "\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = frame.lo + (frame.hi - frame.lo) * t / 4.0;
    svg << "    <text stroke=\"none\" x=\"" << fmt(frame.px(v)) << "\" y=\""
        << fmt(kSize - kMargin + 16) << "\" text-anchor=\"middle\">" << fmt(v)
        << "</text>\n"
        << "    <text stroke=\"none\" x=\"" << fmt(kMargin - 6) << "\" y=\""
        << fmt(frame.py(v) + 4) << "\" text-anchor=\"end\">" << fmt(v)
        << "</text>\n";
  }
  svg << "    <text stroke=\"none\" x=\"" << fmt(kSize / 2) << "\" y=\""
      << fmt(kSize - 16) << "\" text-anchor=\"middle\">" << x_label << "</text>\n"
      << "    <text stroke=\"none\" x=\"16\" y=\"" << fmt(kSize / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << fmt(kSize / 2)
      << ")\">" << y_label << "</text>\n"
      << "  </g>\n";

  svg << "  <g clip-path=\"url(#plot-area)\">\n"
      << "    <line id=\"reference-line\" x1=\"" << fmt(frame.px(frame.lo))
      << "\" y1=\"" << fmt(frame.py(frame.lo)) << "\" x2=\""
      << fmt(frame.px(frame.hi)) << "\" y2=\"" << fmt(frame.py(frame.hi))
      << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
  const double y_lo = fit.intercept + fit.slope * frame.lo;
  const double y_hi = fit.intercept + fit.slope * frame.hi;
  svg << "    <line id=\"fit-line\" x1=\"" << fmt(frame.px(frame.lo)) << "\" y1=\""
      << fmt(frame.py(y_lo)) << "\" x2=\"" << fmt(frame.px(frame.hi))
      << "\" y2=\"" << fmt(frame.py(y_hi))
      << "\" stroke=\"crimson\" stroke-width=\"2\"/>\n";
  for (std::size_t i = 0; i < coords.size(); ++i) {
    svg << "    <circle cx=\"" << fmt(frame.px(coords[i].first)) << "\" cy=\""
        << fmt(frame.py(coords[i].second))
        << "\" r=\"4\" fill=\"steelblue\">";
    if (!points[i].name.empty()) {
      svg << "<title>" << xml_escape(points[i].name) << "</title>";
    }
    svg << "</circle>\n";
  }
  svg << "  </g>\n";

  svg << "  <text x=\"" << fmt(kSize / 2) << "\" y=\"30\" text-anchor=\"middle\" "
         "font-size=\"13\" font-family=\"sans-serif\">"
      << to_string(fit.transform) << " fit: slope " << fmt(fit.slope)
      << ", intercept " << fmt(fit.intercept) << "</text>\n"
      << "</svg>\n";
  return svg.str();
}

}  // namespace spurious_lens
