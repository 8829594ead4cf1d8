// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Road centerline profiles sampled along station x: signed curvature
// (left turn positive), superelevation toward the curve center, posted speed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lka/csv.hpp"
#include "lka/error.hpp"

namespace lka {

struct StationSample {
  double x = 0.0;             // [m]
  double kappa = 0.0;         // [1/m]
  double roll = 0.0;          // [rad]
  double posted_speed = 1.0;  // [m/s]
};

inline void validate(const StationSample& s) {
  if (!std::isfinite(s.x)) throw DomainError("station x is not finite");
  if (!std::isfinite(s.kappa) || std::abs(s.kappa) >= 1.0)
    throw DomainError("curvature must satisfy |kappa| < 1 1/m");
  if (!std::isfinite(s.roll) || std::abs(s.roll) >= 0.35)
    throw DomainError("superelevation must satisfy |roll| < 0.35 rad");
  if (!std::isfinite(s.posted_speed) || s.posted_speed <= 0.0)
    throw DomainError("posted speed must be positive");
}

/// Ordered, validated station samples. Immutable after construction.
class RoadProfile {
 public:
  RoadProfile(std::string name, std::vector<StationSample> samples)
      : name_(std::move(name)), samples_(std::move(samples)) {
    if (samples_.size() < 2) throw DomainError("road profile needs at least 2 samples");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      validate(samples_[i]);
      if (i > 0 && !(samples_[i].x > samples_[i - 1].x))
        throw DomainError("station x must be strictly increasing");
    }
  }

  const std::string& name() const { return name_; }
  std::span<const StationSample> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  const StationSample& operator[](std::size_t i) const { return samples_[i]; }
  double x_begin() const { return samples_.front().x; }
  double x_end() const { return samples_.back().x; }
  double span() const { return x_end() - x_begin(); }

  /// Linear interpolation at station x, clamped to the end samples.
  StationSample at(double x) const {
    if (x <= x_begin()) return samples_.front();
    if (x >= x_end()) return samples_.back();
    auto hi = std::upper_bound(samples_.begin(), samples_.end(), x,
                               [](double v, const StationSample& s) { return v < s.x; });
    auto lo = hi - 1;
    const double w = (x - lo->x) / (hi->x - lo->x);
    auto lerp = [w](double a, double b) { return a + w * (b - a); };
    return {x, lerp(lo->kappa, hi->kappa), lerp(lo->roll, hi->roll),
            lerp(lo->posted_speed, hi->posted_speed)};
  }

  std::vector<double> kappas() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.kappa);
    return out;
  }

 private:
  std::string name_;
  std::vector<StationSample> samples_;
};

struct TransitionSpec {
  double kappa_start = 0.0;  // [1/m]
  double kappa_end = 0.0;    // [1/m]
  double length = 0.0;       // [m]
};

/// Linear superelevation ramp applied across a clothoid.
struct RollRamp {
  double roll_start = 0.0;
  double roll_end = 0.0;
};

// ---------------------------------------------------------------------------
// Loading

inline RoadProfile parse_profile(std::istream& in, std::string name) {
  const auto table = csv::Table::read(in);
  if (table.header().empty() || table.size() < 2)
    throw ParseError("geometry file has fewer than 2 samples");
  table.require({"x_m", "kappa_inv_m", "roll_rad", "posted_speed_mps"});

  std::vector<StationSample> samples;
  samples.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto row = table.row(i);
    StationSample s{row.number_at("x_m"), row.number_at("kappa_inv_m"), row.number_at("roll_rad"),
                    row.number_at("posted_speed_mps")};
    try {
      validate(s);
    } catch (const DomainError& e) {
      throw ParseError(e.what(), row.number);
    }
    samples.push_back(s);
  }
  std::stable_sort(samples.begin(), samples.end(),
                   [](const StationSample& a, const StationSample& b) { return a.x < b.x; });
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].x == samples[i - 1].x)
      throw ParseError("duplicate station x = " + std::to_string(samples[i].x));
  return RoadProfile(std::move(name), std::move(samples));
}

inline RoadProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open geometry file '" + path + "'");
  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (auto dot = name.rfind('.'); dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  return parse_profile(in, std::move(name));
}

// ---------------------------------------------------------------------------
// Resampling and differentiation

namespace detail {

/// Grid x0, x0+dx, ... with the far endpoint appended when the span is not a
/// whole number of steps.
inline std::vector<double> uniform_grid(double x0, double x1, double dx) {
  const double span = x1 - x0;
  const double steps = span / dx;
  const double whole = std::round(steps);
  std::vector<double> xs;
  if (std::abs(steps - whole) <= 1e-9 * std::max(1.0, steps)) {
    const auto n = static_cast<std::size_t>(whole);
    xs.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) xs.push_back(x0 + static_cast<double>(i) * dx);
    xs.push_back(x1);
  } else {
    const auto n = static_cast<std::size_t>(std::floor(steps));
    for (std::size_t i = 0; i <= n; ++i) xs.push_back(x0 + static_cast<double>(i) * dx);
    xs.push_back(x1);
  }
  return xs;
}

inline void require_uniform(std::span<const double> xs) {
  if (xs.size() < 2) throw DomainError("need at least 2 samples to differentiate");
  double lo = xs[1] - xs[0], hi = lo;
  for (std::size_t i = 2; i < xs.size(); ++i) {
    const double d = xs[i] - xs[i - 1];
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  const double mean = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
  if ((hi - lo) / mean > 1e-9) throw DomainError("profile spacing is not uniform; resample first");
}

/// Central differences inside, second-order one-sided at the ends (first-order
/// when only two samples exist). Exact for linear data.
inline std::vector<double> derivative(std::span<const double> xs, std::span<const double> ys) {
  require_uniform(xs);
  const std::size_t n = xs.size();
  const double h = (xs.back() - xs.front()) / static_cast<double>(n - 1);
  std::vector<double> d(n);
  if (n == 2) {
    d[0] = d[1] = (ys[1] - ys[0]) / h;
    return d;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (ys[i + 1] - ys[i - 1]) / (2.0 * h);
  d[0] = (-3.0 * ys[0] + 4.0 * ys[1] - ys[2]) / (2.0 * h);
  d[n - 1] = (3.0 * ys[n - 1] - 4.0 * ys[n - 2] + ys[n - 3]) / (2.0 * h);
  return d;
}

template <class Field>
std::vector<std::pair<double, double>> profile_gradient(const RoadProfile& p, Field field) {
  std::vector<double> xs, ys;
  xs.reserve(p.size());
  ys.reserve(p.size());
  for (const auto& s : p.samples()) {
    xs.push_back(s.x);
    ys.push_back(field(s));
  }
  const auto d = derivative(xs, ys);
  std::vector<std::pair<double, double>> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = {xs[i], d[i]};
  return out;
}

}  // namespace detail

inline RoadProfile resample_uniform(const RoadProfile& profile, double dx) {
  if (!(dx > 0.0) || !std::isfinite(dx)) throw DomainError("resample step must be positive");
  if (dx > profile.span() * (1.0 + 1e-12)) throw DomainError("resample step exceeds profile span");
  std::vector<StationSample> out;
  for (double x : detail::uniform_grid(profile.x_begin(), profile.x_end(), dx))
    out.push_back(profile.at(x));
  return RoadProfile(profile.name(), std::move(out));
}

/// Resample with the step nearest to `target_dx` that divides the span evenly.
inline RoadProfile resample_even(const RoadProfile& profile, double target_dx) {
  if (!(target_dx > 0.0)) throw DomainError("resample step must be positive");
  const double steps = std::max(1.0, std::ceil(profile.span() / target_dx - 1e-9));
  return resample_uniform(profile, profile.span() / steps);
}

/// (x, dkappa/dx) per sample. Requires uniform spacing.
inline std::vector<std::pair<double, double>> curvature_gradient(const RoadProfile& profile) {
  return detail::profile_gradient(profile, [](const StationSample& s) { return s.kappa; });
}

/// (x, droll/dx) per sample. Requires uniform spacing.
inline std::vector<std::pair<double, double>> roll_gradient(const RoadProfile& profile) {
  return detail::profile_gradient(profile, [](const StationSample& s) { return s.roll; });
}

// ---------------------------------------------------------------------------
// Construction

inline RoadProfile build_clothoid_profile(const TransitionSpec& spec, double dx,
                                          std::optional<RollRamp> roll = std::nullopt,
                                          double posted_speed = 25.0,
                                          std::string name = "clothoid") {
  if (!(spec.length > 0.0) || !std::isfinite(spec.length))
    throw DomainError("transition length must be positive");
  if (!(dx > 0.0)) throw DomainError("sample step must be positive");
  if (dx > spec.length) throw DomainError("sample step exceeds transition length");
  const double slope = (spec.kappa_end - spec.kappa_start) / spec.length;
  std::vector<StationSample> samples;
  for (double x : detail::uniform_grid(0.0, spec.length, dx)) {
    const double f = x / spec.length;
    double r = 0.0;
    if (roll) r = roll->roll_start + f * (roll->roll_end - roll->roll_start);
    samples.push_back({x, spec.kappa_start + slope * x, r, posted_speed});
  }
  samples.back().kappa = spec.kappa_end;
  return RoadProfile(std::move(name), std::move(samples));
}

/// Straight lead-in, clothoid entry, constant arc, clothoid exit, straight
/// run-out. Superelevation follows the curvature ramp linearly.
struct CurveSpec {
  double kappa = 0.005;        // arc curvature [1/m], signed
  double lead_in = 100.0;      // [m]
  double transition = 60.0;    // clothoid length on each side [m]
  double arc = 200.0;          // [m]
  double run_out = 100.0;      // [m]
  double roll = 0.0;           // superelevation on the arc [rad]
  double posted_speed = 25.0;  // [m/s]
};

inline RoadProfile build_curve_profile(const CurveSpec& c, double dx, std::string name = "curve") {
  if (!(dx > 0.0)) throw DomainError("sample step must be positive");
  if (c.lead_in < 0.0 || c.run_out < 0.0 || c.arc < 0.0 || c.transition < 0.0)
    throw DomainError("curve section lengths must be non-negative");
  const double x1 = c.lead_in;
  const double x2 = x1 + c.transition;
  const double x3 = x2 + c.arc;
  const double x4 = x3 + c.transition;
  const double x5 = x4 + c.run_out;
  if (!(x5 > 0.0)) throw DomainError("curve has zero length");
  auto shape = [&](double x) {
    if (x <= x1 || x >= x4) return 0.0;
    if (x < x2) return (x - x1) / c.transition;
    if (x <= x3) return 1.0;
    return (x4 - x) / c.transition;
  };
  std::vector<StationSample> samples;
  for (double x : detail::uniform_grid(0.0, x5, dx)) {
    const double f = shape(x);
    samples.push_back({x, c.kappa * f, c.roll * f, c.posted_speed});
  }
  return RoadProfile(std::move(name), std::move(samples));
}

// ---------------------------------------------------------------------------
// Apex window

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const IndexRange&) const = default;
};

inline constexpr double kApexBandFraction = 0.6;

/// Near-apex samples: the contiguous run around the peak |kappa| whose
/// magnitude stays at or above 0.6 of the peak.
inline IndexRange extract_apex_window(std::span<const double> kappa) {
  if (kappa.empty()) throw DomainError("empty curvature series");
  std::size_t peak = 0;
  double peak_abs = 0.0;
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    if (std::abs(kappa[i]) > peak_abs) {
      peak_abs = std::abs(kappa[i]);
      peak = i;
    }
  }
  if (!(peak_abs > 0.0)) throw DomainError("curvature series has no curve (all zero)");
  const double band = kApexBandFraction * peak_abs;
  std::size_t lo = peak, hi = peak + 1;
  while (lo > 0 && std::abs(kappa[lo - 1]) >= band) --lo;
  while (hi < kappa.size() && std::abs(kappa[hi]) >= band) ++hi;
  return {lo, hi};
}

inline IndexRange extract_apex_window(std::span<const std::pair<double, double>> series) {
  std::vector<double> k;
  k.reserve(series.size());
  for (const auto& [x, kappa] : series) k.push_back(kappa);
  return extract_apex_window(std::span<const double>(k));
}

}  // namespace lka
