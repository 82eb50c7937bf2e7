#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvf/introspect.hpp"

namespace mvf {

// Grouped bar chart of a GateReport: one group per layer, one bar per
// encoder, bar height proportional to the mean gate weight (full axis = 1).
inline std::string gate_report_svg(const GateReport& report,
                                   const std::vector<std::string>& encoder_names) {
  if (report.layer_means.empty()) {
    throw std::invalid_argument("gate_report_svg: empty report");
  }
  const int N = int(report.layer_means.front().size());
  if (int(encoder_names.size()) != N) {
    throw std::invalid_argument("gate_report_svg: need one name per encoder");
  }
  static const char* palette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759",
                                  "#b07aa1", "#76b7b2", "#edc948", "#9c755f"};
  const int bar_w = 22, gap = 6, group_gap = 28;
  const int plot_h = 160, margin = 40, legend_h = 20 + 16 * N;
  const int group_w = N * bar_w + (N - 1) * gap;
  const int L = int(report.layer_means.size());
  const int width = 2 * margin + L * group_w + (L - 1) * group_gap;
  const int height = margin + plot_h + legend_h + 20;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  svg << "<text x=\"" << margin << "\" y=\"20\" font-size=\"13\">"
      << "mean gate weight per layer"
      << (report.group_label.empty() ? "" : " — " + report.group_label)
      << " (n=" << report.sample_count << ")</text>\n";
  for (int l = 0; l < L; ++l) {
    const int x0 = margin + l * (group_w + group_gap);
    for (int n = 0; n < N; ++n) {
      const double w = report.layer_means[size_t(l)](n);
      const int h = int(w * plot_h + 0.5);
      svg << "<rect x=\"" << x0 + n * (bar_w + gap) << "\" y=\""
          << margin + plot_h - h << "\" width=\"" << bar_w << "\" height=\""
          << h << "\" fill=\"" << palette[n % 8] << "\"/>\n";
    }
    svg << "<text x=\"" << x0 << "\" y=\"" << margin + plot_h + 14
        << "\" font-size=\"11\">layer " << l + 1 << "</text>\n";
  }
  for (int n = 0; n < N; ++n) {
    const int y = margin + plot_h + 30 + n * 16;
    svg << "<rect x=\"" << margin << "\" y=\"" << y - 10
        << "\" width=\"12\" height=\"12\" fill=\"" << palette[n % 8] << "\"/>\n";
    svg << "<text x=\"" << margin + 18 << "\" y=\"" << y
        << "\" font-size=\"11\">" << encoder_names[size_t(n)] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace mvf
