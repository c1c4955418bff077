#pragma once

#include <string>
#include <utility>
#include <vector>

namespace quantlab::cli {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y), x ascending
};

struct ChartOptions {
  std::string title;
  std::string x_label = "epoch";
  std::string y_label;
  bool log_y = false;
  int width = 860;
  int height = 520;
  // log-scale values are clamped into [clip_lo, clip_hi] before plotting.
  double clip_lo = 1e-16;
  double clip_hi = 1e16;
};

// Deterministic line chart: identical inputs yield byte-identical SVG.
// Throws std::invalid_argument when no series has points.
std::string render_line_chart(const std::vector<Series>& series, const ChartOptions& opt);

}  // namespace quantlab::cli
