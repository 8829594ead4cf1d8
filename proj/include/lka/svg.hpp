// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Plain SVG scatter plot with an optional fitted line. Output depends only on
// the inputs (fixed number formatting, no timestamps), so reruns are
// byte-identical.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lka/deviation_model.hpp"

namespace lka::svg {

struct PlotLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

/// Tick step of 1, 2 or 5 times a power of ten giving about `target` ticks.
inline double nice_step(double span, int target = 5) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  return (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
}

}  // namespace detail

inline std::string scatter_with_fit(std::span<const CurvaturePoint> points, const std::optional<LinearFit>& fit,
                                    const PlotLabels& labels) {
  constexpr double W = 640, H = 420, left = 70, right = 20, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;

  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (!points.empty()) {
    auto [xmin, xmax] = std::minmax_element(points.begin(), points.end(),
                                            [](const auto& a, const auto& b) { return a.kappa < b.kappa; });
    auto [ymin, ymax] = std::minmax_element(points.begin(), points.end(),
                                            [](const auto& a, const auto& b) { return a.deviation < b.deviation; });
    x0 = xmin->kappa, x1 = xmax->kappa, y0 = ymin->deviation, y1 = ymax->deviation;
  }
  if (fit) {
    for (double x : {x0, x1}) {
      y0 = std::min(y0, predict_deviation(*fit, x));
      y1 = std::max(y1, predict_deviation(*fit, x));
    }
  }
  if (!(x1 > x0)) x0 -= 0.5 * std::max(std::abs(x0), 1e-3), x1 += 0.5 * std::max(std::abs(x1), 1e-3);
  if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
  const double line_x0 = x0, line_x1 = x1;  // fit drawn over the data range only
  const double sx = detail::nice_step(x1 - x0), sy = detail::nice_step(y1 - y0);
  x0 = std::floor(x0 / sx) * sx, x1 = std::ceil(x1 / sx) * sx;
  y0 = std::floor(y0 / sy) * sy, y1 = std::ceil(y1 / sy) * sy;

  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };
  using detail::num;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << detail::escape(labels.title) << "</text>\n";

  for (int i = 0; x0 + i * sx <= x1 + 1e-9 * sx; ++i) {
    const double v = x0 + i * sx;
    s << "<line x1=\"" << num(px(v)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(px(v)) << "\" y2=\""
      << num(top + ph) << "\" stroke=\"#e0e0e0\"/>\n";
    s << "<text x=\"" << num(px(v)) << "\" y=\"" << num(top + ph + 16) << "\" text-anchor=\"middle\">"
      << detail::tick(v) << "</text>\n";
  }
  for (int i = 0; y0 + i * sy <= y1 + 1e-9 * sy; ++i) {
    const double v = y0 + i * sy;
    s << "<line x1=\"" << num(left) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(left + pw) << "\" y2=\""
      << num(py(v)) << "\" stroke=\"#e0e0e0\"/>\n";
    s << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">"
      << detail::tick(v) << "</text>\n";
  }
  s << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(H - 10) << "\" text-anchor=\"middle\">"
    << detail::escape(labels.x_label) << "</text>\n";
  s << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num(top + ph / 2) << ")\">" << detail::escape(labels.y_label) << "</text>\n";

  s << "<g fill=\"#1f77b4\" fill-opacity=\"0.6\">\n";
  for (const auto& p : points)
    s << "<circle cx=\"" << num(px(p.kappa)) << "\" cy=\"" << num(py(p.deviation)) << "\" r=\"2.5\"/>\n";
  s << "</g>\n";

  if (fit) {
    s << "<line x1=\"" << num(px(line_x0)) << "\" y1=\"" << num(py(predict_deviation(*fit, line_x0)))
      << "\" x2=\"" << num(px(line_x1)) << "\" y2=\"" << num(py(predict_deviation(*fit, line_x1)))
      << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    char legend[128];
    std::snprintf(legend, sizeof legend, "d = %.4g k %+.4g, R2 = %.3f", fit->slope, fit->intercept, fit->r_squared);
    s << "<text x=\"" << num(left + pw - 8) << "\" y=\"" << num(top + 16) << "\" text-anchor=\"end\" fill=\"#d62728\">"
      << legend << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace lka::svg
