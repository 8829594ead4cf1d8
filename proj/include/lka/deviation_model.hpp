// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Linear curvature -> lane deviation relation and its least-squares refit.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lka/error.hpp"
#include "lka/road_geometry.hpp"
#include "lka/telemetry.hpp"

namespace lka {

struct LinearFit {
  double slope = 0.0;      // [m^2]
  double intercept = 0.0;  // [m]
  double r_squared = 0.0;
  std::size_t n = 0;  // 0 when the sample count is unknown
};

/// Field relation between apex curvature and signed deviation measured over
/// production LKA traversals: d = -8.327 kappa + 0.214, R^2 = 0.673. The
/// number of samples behind it is not published.
inline constexpr LinearFit kFieldFit{-8.327, 0.214, 0.673, 0};

inline double predict_deviation(const LinearFit& fit, double kappa) { return fit.slope * kappa + fit.intercept; }

struct CurvaturePoint {
  double kappa = 0.0;
  double deviation = 0.0;
};

/// Ordinary least squares of deviation on kappa.
inline LinearFit fit_linear(std::span<const CurvaturePoint> points) {
  const std::size_t n = points.size();
  if (n < 2) throw DomainError("fit_linear: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.kappa;
    my += p.deviation;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : points) {
    const double dx = p.kappa - mx, dy = p.deviation - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw DomainError("fit_linear: all curvature values are identical");
  LinearFit fit;
  fit.n = n;
  const double y0 = points.front().deviation;
  if (std::all_of(points.begin(), points.end(), [y0](const auto& p) { return p.deviation == y0; })) {
    fit.intercept = y0;  // rounding in the means would otherwise leave a spurious slope
    fit.r_squared = 1.0;
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& p : points) {
    const double r = p.deviation - predict_deviation(fit, p.kappa);
    ss_res += r * r;
  }
  if (syy > 0.0)
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  else
    fit.r_squared = 1.0;  // constant deviations are fitted exactly by a flat line
  return fit;
}

inline constexpr double kStraightKappa = 1e-4;  // |kappa| at or below this is a straight [1/m]

/// Curve traversals: maximal runs of same-sign curvature above the straight
/// threshold, as half-open record ranges.
inline std::vector<IndexRange> curve_traversals(const TelemetryLog& log, double straight_kappa = kStraightKappa) {
  std::vector<IndexRange> out;
  std::size_t i = 0;
  while (i < log.size()) {
    if (std::abs(log[i].kappa) <= straight_kappa) {
      ++i;
      continue;
    }
    const bool left = log[i].kappa > 0.0;
    std::size_t j = i + 1;
    while (j < log.size() && std::abs(log[j].kappa) > straight_kappa && (log[j].kappa > 0.0) == left) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

/// (kappa, lane deviation) pairs from the apex window of every traversal.
inline std::vector<CurvaturePoint> apex_dataset(const TelemetryLog& log, double straight_kappa = kStraightKappa) {
  std::vector<CurvaturePoint> out;
  for (const auto& tr : curve_traversals(log, straight_kappa)) {
    std::vector<double> kappas;
    kappas.reserve(tr.size());
    for (std::size_t i = tr.begin; i < tr.end; ++i) kappas.push_back(log[i].kappa);
    const auto w = extract_apex_window(std::span<const double>(kappas));
    for (std::size_t i = tr.begin + w.begin; i < tr.begin + w.end; ++i)
      out.push_back({log[i].kappa, lane_deviation(log[i])});
  }
  if (out.empty()) throw DomainError("apex_dataset: no curves in log");
  return out;
}

}  // namespace lka
