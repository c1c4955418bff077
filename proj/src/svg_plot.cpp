#include "quantlab/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace quantlab::cli {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string gnum(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Largest {1,2,5}*10^k step not above raw.
double nice_step(double raw) {
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  if (r >= 5.0) return 5.0 * mag;
  if (r >= 2.0) return 2.0 * mag;
  return mag;
}

}  // namespace

std::string render_line_chart(const std::vector<Series>& series, const ChartOptions& opt) {
  bool any = false;
  for (const Series& s : series) any = any || !s.points.empty();
  if (!any) throw std::invalid_argument("render_line_chart: no data points");

  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool first = true;
  auto clampy = [&](double y) {
    if (!opt.log_y) return y;
    return std::min(opt.clip_hi, std::max(opt.clip_lo, y));
  };
  for (const Series& s : series) {
    for (const auto& [x, yraw] : s.points) {
      const double y = clampy(yraw);
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }

  double lo, hi;  // y range in plot units (log10 when log_y)
  std::vector<std::pair<double, std::string>> yticks;
  if (opt.log_y) {
    lo = std::floor(std::log10(ymin));
    hi = std::ceil(std::log10(ymax));
    if (hi <= lo) {
      lo -= 1.0;
      hi += 1.0;
    }
    const int decades = static_cast<int>(hi - lo);
    const int stride = decades <= 8 ? 1 : (decades + 7) / 8;
    for (int d = static_cast<int>(lo); d <= static_cast<int>(hi); d += stride) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "1e%d", d);
      yticks.emplace_back(static_cast<double>(d), buf);
    }
  } else {
    lo = std::min(0.0, ymin);
    hi = ymax <= lo ? lo + 1.0 : ymax;
    hi += (hi - lo) * 0.05;
    const double step = nice_step((hi - lo) / 5.0);
    for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step)
      yticks.emplace_back(v, gnum(v));
  }

  const double px0 = 72, px1 = opt.width - 24.0, py0 = 44, py1 = opt.height - 52.0;
  auto sx = [&](double x) { return px0 + (x - xmin) / (xmax - xmin) * (px1 - px0); };
  auto sy = [&](double yraw) {
    const double y = opt.log_y ? std::log10(clampy(yraw)) : yraw;
    return py1 - (y - lo) / (hi - lo) * (py1 - py0);
  };

  std::string out;
  out.reserve(1 << 16);
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opt.width) + "\" height=\"" +
         std::to_string(opt.height) + "\" viewBox=\"0 0 " + std::to_string(opt.width) + " " +
         std::to_string(opt.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out += "<text x=\"" + num((px0 + px1) / 2) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
         "text-anchor=\"middle\" fill=\"#000000\">" + opt.title + "</text>\n";

  // Gridlines and y ticks.
  for (const auto& [v, label] : yticks) {
    const double y = py1 - (v - lo) / (hi - lo) * (py1 - py0);
    if (y < py0 - 0.5 || y > py1 + 0.5) continue;
    out += "<line x1=\"" + num(px0) + "\" y1=\"" + num(y) + "\" x2=\"" + num(px1) + "\" y2=\"" + num(y) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + num(px0 - 6) + "\" y=\"" + num(y + 4) + "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"end\" fill=\"#000000\">" + label + "</text>\n";
  }

  // X ticks: at most 10 integer-ish ticks.
  {
    const double step = std::max(1.0, nice_step((xmax - xmin) / 8.0));
    for (double v = std::ceil(xmin / step) * step; v <= xmax + step * 1e-9; v += step) {
      const double x = sx(v);
      out += "<line x1=\"" + num(x) + "\" y1=\"" + num(py1) + "\" x2=\"" + num(x) + "\" y2=\"" + num(py1 + 4) +
             "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
      out += "<text x=\"" + num(x) + "\" y=\"" + num(py1 + 18) + "\" font-family=\"sans-serif\" font-size=\"11\" "
             "text-anchor=\"middle\" fill=\"#000000\">" + gnum(v) + "</text>\n";
    }
  }

  // Axes.
  out += "<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px0) + "\" y2=\"" + num(py1) +
         "\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n";
  out += "<line x1=\"" + num(px0) + "\" y1=\"" + num(py1) + "\" x2=\"" + num(px1) + "\" y2=\"" + num(py1) +
         "\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n";
  out += "<text x=\"" + num((px0 + px1) / 2) + "\" y=\"" + num(py1 + 38.0) + "\" font-family=\"sans-serif\" "
         "font-size=\"13\" text-anchor=\"middle\" fill=\"#000000\">" + opt.x_label + "</text>\n";
  out += "<text x=\"18\" y=\"" + num((py0 + py1) / 2) + "\" font-family=\"sans-serif\" font-size=\"13\" "
         "text-anchor=\"middle\" fill=\"#000000\" transform=\"rotate(-90 18 " + num((py0 + py1) / 2) + ")\">" +
         opt.y_label + "</text>\n";

  // Curves.
  for (size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    if (s.points.empty()) continue;
    const char* color = kPalette[i % kPaletteSize];
    std::string pts;
    for (const auto& [x, y] : s.points) {
      if (!pts.empty()) pts += " ";
      pts += num(sx(x)) + "," + num(sy(y));
    }
    if (s.points.size() == 1) {
      out += "<circle cx=\"" + num(sx(s.points[0].first)) + "\" cy=\"" + num(sy(s.points[0].second)) +
             "\" r=\"3\" fill=\"" + color + "\"/>\n";
    } else {
      out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.8\"/>\n";
    }
  }

  // Legend, top-right inside the plot area.
  {
    const double lx = px1 - 170, ly0 = py0 + 10;
    out += "<rect x=\"" + num(lx - 8) + "\" y=\"" + num(ly0 - 14) + "\" width=\"170\" height=\"" +
           num(series.size() * 18.0 + 10.0) + "\" fill=\"#ffffff\" fill-opacity=\"0.85\" stroke=\"#bbbbbb\"/>\n";
    for (size_t i = 0; i < series.size(); ++i) {
      const double ly = ly0 + 18.0 * static_cast<double>(i);
      const char* color = kPalette[i % kPaletteSize];
      out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 24) + "\" y2=\"" +
             num(ly - 4) + "\" stroke=\"" + std::string(color) + "\" stroke-width=\"2.5\"/>\n";
      out += "<text x=\"" + num(lx + 30) + "\" y=\"" + num(ly) + "\" font-family=\"sans-serif\" font-size=\"12\" "
             "fill=\"#000000\">" + series[i].label + "</text>\n";
    }
  }

  out += "</svg>\n";
  return out;
}

}  // namespace quantlab::cli
