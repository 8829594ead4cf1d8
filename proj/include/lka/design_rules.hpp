// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Geometry design checks derived from the steering-torque chain:
//   R1 minimum radius       (torque and steering-angle bound)
//   R2 transition length    (torque-rate bound, v^3 dependence)
//   R3 superelevation rate  (roll' share of the torque-rate budget)
//   R4 advisory speed       (speed at which R1/R2 become feasible)

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lka/error.hpp"
#include "lka/lateral_dynamics.hpp"
#include "lka/road_geometry.hpp"

namespace lka {

enum class Rule { R1, R2, R3, R4 };
enum class Severity { advisory, violation };

inline const char* to_string(Rule r) {
  switch (r) {
    case Rule::R1: return "R1";
    case Rule::R2: return "R2";
    case Rule::R3: return "R3";
    case Rule::R4: return "R4";
  }
  return "?";
}

inline const char* to_string(Severity s) { return s == Severity::advisory ? "advisory" : "violation"; }

struct AuditFinding {
  Rule rule = Rule::R1;
  double x_start = 0.0;
  double x_end = 0.0;
  Severity severity = Severity::violation;
  double required_value = 0.0;
  double actual_value = 0.0;
  std::string unit;
  std::string message;
};

struct AuditReport {
  std::string profile_name;
  std::string capability_name;
  std::string speed_mode;  // "posted" or "fixed"
  double speed_used = 0.0;
  std::vector<AuditFinding> findings;

  std::size_t count(Rule r) const {
    return static_cast<std::size_t>(std::count_if(findings.begin(), findings.end(),
                                                   [r](const AuditFinding& f) { return f.rule == r; }));
  }
  std::size_t violations() const {
    return static_cast<std::size_t>(std::count_if(findings.begin(), findings.end(), [](const AuditFinding& f) {
      return f.severity == Severity::violation;
    }));
  }
};

// ---------------------------------------------------------------------------
// Single-rule evaluations

/// Smallest radius the vehicle can hold at speed v: max of the torque bound
/// v^2 / (t_max/K_a + g roll) and the steering-angle bound L / tan(delta_max).
inline double min_radius(const VehicleCapability& cap, double v, double roll, double g = kGravity) {
  if (!(v > 0.0)) throw DomainError("min_radius: speed must be positive");
  const double capacity = cap.t_max / cap.k_a + g * roll;
  if (!(capacity > 0.0)) throw DomainError("min_radius: over-banked, t_max/k_a + g*roll <= 0");
  const double r_torque = v * v / capacity;
  const double r_angle = cap.wheelbase / std::tan(cap.delta_max);
  return std::max(r_torque, r_angle);
}

/// Clothoid length that keeps K_a v^3 dkappa/dx at the torque-rate limit.
inline double min_transition_length(const VehicleCapability& cap, double v, double delta_kappa) {
  if (!(v > 0.0)) throw DomainError("min_transition_length: speed must be positive");
  if (!(cap.dt_dt_max > 0.0)) throw DomainError("min_transition_length: dt_dt_max must be positive");
  return cap.k_a * v * v * v * std::abs(delta_kappa) / cap.dt_dt_max;
}

struct GradientCheck {
  bool pass = true;
  double demand = 0.0;  // |K_a v g roll'| [N·m/s]
  double budget = 0.0;  // budget_fraction * dt_dt_max
  double margin = 0.0;  // budget - demand
};

inline constexpr double kDefaultRollBudget = 0.5;

inline GradientCheck check_superelevation_gradient(const VehicleCapability& cap, double v, double droll_dx,
                                                   double budget_fraction = kDefaultRollBudget,
                                                   double g = kGravity) {
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0))
    throw DomainError("superelevation budget fraction must be in (0, 1]");
  GradientCheck c;
  c.demand = std::abs(cap.k_a * v * g * droll_dx);
  c.budget = budget_fraction * cap.dt_dt_max;
  c.margin = c.budget - c.demand;
  c.pass = c.demand <= c.budget;
  return c;
}

/// Highest speed at which both the torque bound (on kappa_max) and the
/// torque-rate bound (on dkappa_dx_max) hold. nullopt when neither input
/// constrains the speed.
inline std::optional<double> advisory_speed(const VehicleCapability& cap, double kappa_max,
                                            double dkappa_dx_max, double roll = 0.0, double g = kGravity) {
  kappa_max = std::abs(kappa_max);
  dkappa_dx_max = std::abs(dkappa_dx_max);
  if (kappa_max == 0.0 && dkappa_dx_max == 0.0) return std::nullopt;
  constexpr double inf = std::numeric_limits<double>::infinity();
  double v_torque = inf, v_rate = inf;
  if (kappa_max > 0.0) {
    const double capacity = cap.t_max / cap.k_a + g * roll;
    if (!(capacity > 0.0)) throw DomainError("advisory_speed: over-banked, t_max/k_a + g*roll <= 0");
    v_torque = std::sqrt(capacity / kappa_max);
  }
  if (dkappa_dx_max > 0.0) v_rate = std::cbrt(cap.dt_dt_max / (cap.k_a * dkappa_dx_max));
  return std::min(v_torque, v_rate);
}

// ---------------------------------------------------------------------------
// Profile audit

struct SpeedMode {
  std::optional<double> fixed;  // unset: use each station's posted speed

  static SpeedMode posted() { return {}; }
  static SpeedMode constant(double v) { return {v}; }
};

struct AuditOptions {
  double roll_budget = kDefaultRollBudget;
  double merge_gap = 5.0;    // [m]
  double resample_dx = 1.0;  // [m]
  double g = kGravity;
  double tolerance = 1e-9;   // relative slack on limit comparisons
};

namespace detail {

struct StationFlag {
  double x;
  double required;
  double actual;
};

/// Merge flagged stations into runs whose consecutive gap is <= merge_gap.
inline std::vector<std::pair<std::size_t, std::size_t>> merge_runs(const std::vector<StationFlag>& flags,
                                                                   double merge_gap) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (!runs.empty() && flags[i].x - flags[runs.back().second].x <= merge_gap + 1e-9)
      runs.back().second = i;
    else
      runs.emplace_back(i, i);
  }
  return runs;
}

inline std::string format_number(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

}  // namespace detail

inline AuditReport audit_profile(const VehicleCapability& cap, const RoadProfile& profile,
                                 const SpeedMode& mode = SpeedMode::posted(), const AuditOptions& opts = {}) {
  validate(cap);
  if (mode.fixed && !(*mode.fixed > 0.0)) throw DomainError("audit speed must be positive");
  const RoadProfile p = resample_even(profile, opts.resample_dx);
  const auto dkappa = curvature_gradient(p);
  const auto droll = roll_gradient(p);
  const auto samples = p.samples();
  const std::size_t n = samples.size();

  auto speed_at = [&](std::size_t i) { return mode.fixed ? *mode.fixed : samples[i].posted_speed; };
  const double slack = 1.0 + opts.tolerance;

  std::vector<detail::StationFlag> r1, r2, r3;
  std::vector<bool> needs_speed(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = samples[i];
    const double v = speed_at(i);
    if (s.kappa != 0.0) {
      const double r_min = min_radius(cap, v, s.roll, opts.g);
      const double radius = 1.0 / std::abs(s.kappa);
      if (radius * slack < r_min) {
        r1.push_back({s.x, r_min, radius});
        needs_speed[i] = true;
      }
    }
    const double rate = torque_rate_simplified(cap, v, std::abs(dkappa[i].second));
    if (rate > cap.dt_dt_max * slack) {
      r2.push_back({s.x, cap.dt_dt_max, rate});
      needs_speed[i] = true;
    }
    const auto grad = check_superelevation_gradient(cap, v, droll[i].second, opts.roll_budget, opts.g);
    if (grad.demand > grad.budget * slack) r3.push_back({s.x, grad.budget, grad.demand});
  }

  AuditReport report;
  report.profile_name = p.name();
  report.capability_name = cap.name;
  report.speed_mode = mode.fixed ? "fixed" : "posted";
  if (mode.fixed) {
    report.speed_used = *mode.fixed;
  } else {
    for (const auto& s : samples) report.speed_used = std::max(report.speed_used, s.posted_speed);
  }

  auto emit = [&](Rule rule, const std::vector<detail::StationFlag>& flags, bool larger_is_worse,
                  const char* unit, const char* what) {
    for (auto [a, b] : detail::merge_runs(flags, opts.merge_gap)) {
      AuditFinding f;
      f.rule = rule;
      f.severity = Severity::violation;
      f.x_start = flags[a].x;
      f.x_end = flags[b].x;
      f.unit = unit;
      f.required_value = flags[a].required;
      f.actual_value = flags[a].actual;
      for (std::size_t k = a; k <= b; ++k) {
        const bool worse = larger_is_worse ? flags[k].actual > f.actual_value : flags[k].actual < f.actual_value;
        if (worse) {
          f.actual_value = flags[k].actual;
          f.required_value = flags[k].required;
        }
      }
      f.message = std::string(what) + " over " + detail::format_number(f.x_start) + "-" +
                  detail::format_number(f.x_end) + " m: " + detail::format_number(f.actual_value) + " " + unit +
                  (larger_is_worse ? " exceeds " : " is below ") + detail::format_number(f.required_value) + " " +
                  unit;
      report.findings.push_back(std::move(f));
    }
  };
  emit(Rule::R1, r1, false, "m", "radius below LKA minimum");
  emit(Rule::R2, r2, true, "N*m/s", "curvature change demands torque rate beyond limit");
  emit(Rule::R3, r3, true, "N*m/s", "superelevation change consumes torque-rate budget");

  // R4: one advisory per merged run of R1/R2 stations.
  std::vector<detail::StationFlag> speed_flags;
  for (std::size_t i = 0; i < n; ++i)
    if (needs_speed[i]) speed_flags.push_back({samples[i].x, 0.0, 0.0});
  for (auto [a, b] : detail::merge_runs(speed_flags, opts.merge_gap)) {
    double kappa_max = 0.0, dkappa_max = 0.0, roll_min = std::numeric_limits<double>::infinity(), v_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (samples[i].x < speed_flags[a].x || samples[i].x > speed_flags[b].x) continue;
      kappa_max = std::max(kappa_max, std::abs(samples[i].kappa));
      dkappa_max = std::max(dkappa_max, std::abs(dkappa[i].second));
      roll_min = std::min(roll_min, samples[i].roll);
      v_max = std::max(v_max, speed_at(i));
    }
    const auto v_adv = advisory_speed(cap, kappa_max, dkappa_max, roll_min, opts.g);
    if (!v_adv) continue;
    AuditFinding f;
    f.rule = Rule::R4;
    f.severity = Severity::advisory;
    f.x_start = speed_flags[a].x;
    f.x_end = speed_flags[b].x;
    f.required_value = *v_adv;
    f.actual_value = v_max;
    f.unit = "m/s";
    f.message = "post advisory speed " + detail::format_number(*v_adv) + " m/s (" +
                detail::format_number(*v_adv / 0.44704) + " mph) over " + detail::format_number(f.x_start) + "-" +
                detail::format_number(f.x_end) + " m; design speed " + detail::format_number(v_max) + " m/s";
    report.findings.push_back(std::move(f));
  }

  std::stable_sort(report.findings.begin(), report.findings.end(), [](const AuditFinding& a, const AuditFinding& b) {
    if (a.rule != b.rule) return a.rule < b.rule;
    return a.x_start < b.x_start;
  });
  return report;
}

}  // namespace lka
