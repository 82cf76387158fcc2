#pragma once

// Minimal SVG line chart: one polyline per series over a shared time axis.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace handsoff {

struct Series {
  std::string name;
  std::vector<double> y;
};

struct PlotPanel {
  std::string title;
  std::vector<Series> series;
};

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#17becf"};
  return colors[i % 6];
}

}  // namespace detail

/// Stacks the panels vertically; t is shared by every series.
inline std::string svg_chart(const std::vector<double>& t,
                             const std::vector<PlotPanel>& panels) {
  constexpr double kWidth = 720.0;
  constexpr double kPanel = 240.0;
  constexpr double kLeft = 60.0;
  constexpr double kRight = 20.0;
  constexpr double kTop = 30.0;
  constexpr double kBottom = 30.0;

  std::ostringstream os;
  os << std::setprecision(6);
  const double height = kPanel * static_cast<double>(panels.size());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << height << "\" font-family=\"sans-serif\" "
        "font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const double t0 = t.empty() ? 0.0 : t.front();
  double t1 = t.empty() ? 1.0 : t.back();
  if (t1 <= t0) t1 = t0 + 1.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kPanel - kTop - kBottom;

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const PlotPanel& panel = panels[p];
    const double y0 = kPanel * static_cast<double>(p) + kTop;
    double lo = 0.0;
    double hi = 0.0;
    for (const Series& s : panel.series) {
      for (double v : s.y) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (hi - lo < 1e-12) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const auto px = [&](double tv) {
      return kLeft + plot_w * (tv - t0) / (t1 - t0);
    };
    const auto py = [&](double v) {
      return y0 + plot_h * (hi - v) / (hi - lo);
    };

    os << "<text x=\"" << kLeft << "\" y=\"" << y0 - 10 << "\">" << panel.title
       << "</text>\n";
    // Axes box, zero line and end labels.
    os << "<rect x=\"" << kLeft << "\" y=\"" << y0 << "\" width=\"" << plot_w
       << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
    if (lo < 0.0 && hi > 0.0) {
      os << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + plot_w
         << "\" y1=\"" << py(0.0) << "\" y2=\"" << py(0.0)
         << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    }
    os << "<text x=\"" << kLeft - 5 << "\" y=\"" << y0 + 4
       << "\" text-anchor=\"end\">" << hi << "</text>\n";
    os << "<text x=\"" << kLeft - 5 << "\" y=\"" << y0 + plot_h
       << "\" text-anchor=\"end\">" << lo << "</text>\n";
    os << "<text x=\"" << kLeft << "\" y=\"" << y0 + plot_h + 15 << "\">" << t0
       << "</text>\n";
    os << "<text x=\"" << kLeft + plot_w << "\" y=\"" << y0 + plot_h + 15
       << "\" text-anchor=\"end\">" << t1 << "</text>\n";

    for (std::size_t s = 0; s < panel.series.size(); ++s) {
      const Series& series = panel.series[s];
      os << "<polyline fill=\"none\" stroke=\"" << detail::palette(s)
         << "\" stroke-width=\"1.5\" points=\"";
      const std::size_t count = std::min(series.y.size(), t.size());
      for (std::size_t i = 0; i < count; ++i) {
        if (i > 0) os << ' ';
        os << px(t[i]) << ',' << py(series.y[i]);
      }
      os << "\"/>\n";
      os << "<text x=\"" << kLeft + plot_w - 5 << "\" y=\""
         << y0 + 14 + 13 * static_cast<double>(s) << "\" text-anchor=\"end\" "
         << "fill=\"" << detail::palette(s) << "\">" << series.name
         << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace handsoff
