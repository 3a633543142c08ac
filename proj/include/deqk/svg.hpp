#pragma once

// Standalone SVG of two overlaid step histograms on shared bins.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "deqk/errors.hpp"
#include "deqk/spectra.hpp"

namespace deqk {

struct HistogramSeries {
  DensityHistogram histogram;
  std::string label;
  std::string color;
};

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
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

/// Plots mass / bin width so the curves are densities. All series must share bin edges.
inline std::string overlay_svg(const std::vector<HistogramSeries>& series, const std::string& title,
                               const std::string& x_label = "eigenvalue") {
  if (series.empty()) throw dimension_error("overlay_svg: no series");
  const auto& edges = series.front().histogram.bin_edges;
  for (const auto& s : series) {
    if (s.histogram.bin_edges != edges) throw dimension_error("overlay_svg: bins differ");
  }
  constexpr double W = 720, H = 440, left = 70, right = 20, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  const double x0 = edges.front(), x1 = edges.back();
  double ymax = 0;
  for (const auto& s : series)
    for (std::size_t b = 0; b < s.histogram.mass.size(); ++b)
      ymax = std::max(ymax, s.histogram.mass[b] / (edges[b + 1] - edges[b]));
  if (ymax <= 0) ymax = 1;
  ymax *= 1.05;
  const auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return top + ph - y / ymax * ph; };
  using detail::fixed;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(W, 0) + "\" height=\"" +
         fixed(H, 0) + "\" viewBox=\"0 0 " + fixed(W, 0) + " " + fixed(H, 0) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fixed(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" + detail::xml_escape(title) + "</text>\n";

  // Axes with five ticks each.
  svg += "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
  svg += "<path d=\"M" + fixed(left) + "," + fixed(top) + " V" + fixed(top + ph) + " H" +
         fixed(left + pw) + "\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4, yv = ymax * t / 4;
    svg += "<path d=\"M" + fixed(px(xv)) + "," + fixed(top + ph) + " v5\"/>\n";
    svg += "<path d=\"M" + fixed(left) + "," + fixed(py(yv)) + " h-5\"/>\n";
  }
  svg += "</g>\n<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4, yv = ymax * t / 4;
    svg += "<text x=\"" + fixed(px(xv)) + "\" y=\"" + fixed(top + ph + 20) +
           "\" text-anchor=\"middle\">" + detail::tick_label(xv) + "</text>\n";
    svg += "<text x=\"" + fixed(left - 8) + "\" y=\"" + fixed(py(yv) + 4) +
           "\" text-anchor=\"end\">" + detail::tick_label(yv) + "</text>\n";
  }
  svg += "<text x=\"" + fixed(left + pw / 2) + "\" y=\"" + fixed(H - 15) +
         "\" text-anchor=\"middle\">" + detail::xml_escape(x_label) + "</text>\n";
  svg += "<text x=\"18\" y=\"" + fixed(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         fixed(top + ph / 2) + ")\">density</text>\n</g>\n";

  for (const auto& s : series) {
    std::string d = "M" + fixed(px(edges.front())) + "," + fixed(py(0));
    for (std::size_t b = 0; b < s.histogram.mass.size(); ++b) {
      d += " V" + fixed(py(s.histogram.mass[b] / (edges[b + 1] - edges[b])));
      d += " H" + fixed(px(edges[b + 1]));
    }
    d += " V" + fixed(py(0));
    svg += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + s.color +
           "\" stroke-width=\"1.5\" stroke-opacity=\"0.85\"/>\n";
  }

  // Legend, top right.
  svg += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = top + 14 + 18.0 * static_cast<double>(i);
    const double lx = left + pw - 200;
    svg += "<path d=\"M" + fixed(lx) + "," + fixed(y) + " h24\" stroke=\"" + series[i].color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fixed(lx + 30) + "\" y=\"" + fixed(y + 4) + "\">" +
           detail::xml_escape(series[i].label) + "</text>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace deqk
