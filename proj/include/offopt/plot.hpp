#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "offopt/error.hpp"

namespace offopt {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Static SVG line chart. Each multi-point series becomes one polyline; a
/// single-point series degenerates to a circle marker.
inline std::string render_line_svg(const std::vector<PlotSeries>& series,
                                   const std::string& x_label, const std::string& y_label) {
  if (series.empty()) throw InvalidArgument("render_line_svg: no series");
  for (const auto& s : series)
    if (s.points.empty()) throw InvalidArgument("render_line_svg: empty series");

  constexpr double width = 880, height = 520;
  constexpr double left = 80, right = 720, top = 40, bottom = 460;
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};

  double x_min = series[0].points[0].first, x_max = x_min;
  double y_min = series[0].points[0].second, y_max = y_min;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_max == x_min) {
    x_min -= 1.0;
    x_max += 1.0;
  }
  if (y_max == y_min) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  const auto sx = [&](double x) {
    return left + (x - x_min) / (x_max - x_min) * (right - left);
  };
  const auto sy = [&](double y) {
    return bottom - (y - y_min) / (y_max - y_min) * (bottom - top);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::svg_num(width) +
         "\" height=\"" + detail::svg_num(height) + "\" viewBox=\"0 0 " +
         detail::svg_num(width) + " " + detail::svg_num(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // axes
  svg += "<line x1=\"" + detail::svg_num(left) + "\" y1=\"" + detail::svg_num(bottom) +
         "\" x2=\"" + detail::svg_num(right) + "\" y2=\"" + detail::svg_num(bottom) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + detail::svg_num(left) + "\" y1=\"" + detail::svg_num(top) + "\" x2=\"" +
         detail::svg_num(left) + "\" y2=\"" + detail::svg_num(bottom) + "\" stroke=\"black\"/>\n";

  constexpr int kTicks = 5;
  for (int t = 0; t <= kTicks; ++t) {
    const double fx = x_min + (x_max - x_min) * t / kTicks;
    const double px = sx(fx);
    svg += "<line x1=\"" + detail::svg_num(px) + "\" y1=\"" + detail::svg_num(bottom) +
           "\" x2=\"" + detail::svg_num(px) + "\" y2=\"" + detail::svg_num(bottom + 6) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::svg_num(px) + "\" y=\"" + detail::svg_num(bottom + 22) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + detail::svg_num(fx) + "</text>\n";

    const double fy = y_min + (y_max - y_min) * t / kTicks;
    const double py = sy(fy);
    svg += "<line x1=\"" + detail::svg_num(left - 6) + "\" y1=\"" + detail::svg_num(py) +
           "\" x2=\"" + detail::svg_num(left) + "\" y2=\"" + detail::svg_num(py) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::svg_num(left - 10) + "\" y=\"" + detail::svg_num(py + 4) +
           "\" font-size=\"12\" text-anchor=\"end\">" + detail::svg_num(fy) + "</text>\n";
  }

  svg += "<text x=\"" + detail::svg_num((left + right) / 2) + "\" y=\"" +
         detail::svg_num(height - 15) + "\" font-size=\"14\" text-anchor=\"middle\">" +
         detail::xml_escape(x_label) + "</text>\n";
  svg += "<text x=\"20\" y=\"" + detail::svg_num((top + bottom) / 2) +
         "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 " +
         detail::svg_num((top + bottom) / 2) + ")\">" + detail::xml_escape(y_label) +
         "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % 4];
    if (series[i].points.size() == 1) {
      const auto& [x, y] = series[i].points[0];
      svg += "<circle cx=\"" + detail::svg_num(sx(x)) + "\" cy=\"" + detail::svg_num(sy(y)) +
             "\" r=\"4\" fill=\"" + color + "\"/>\n";
    } else {
      svg += "<polyline fill=\"none\" stroke=\"";
      svg += color;
      svg += "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : series[i].points)
        svg += detail::svg_num(sx(x)) + "," + detail::svg_num(sy(y)) + " ";
      svg += "\"/>\n";
    }
    // legend
    const double ly = top + 10 + 22 * static_cast<double>(i);
    svg += "<line x1=\"" + detail::svg_num(right + 20) + "\" y1=\"" + detail::svg_num(ly) +
           "\" x2=\"" + detail::svg_num(right + 44) + "\" y2=\"" + detail::svg_num(ly) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + detail::svg_num(right + 50) + "\" y=\"" + detail::svg_num(ly + 4) +
           "\" font-size=\"12\">" + detail::xml_escape(series[i].label) + "</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace offopt
