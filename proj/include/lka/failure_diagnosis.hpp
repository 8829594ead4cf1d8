// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Rule-based attribution of failure episodes to the perception, planning or
// control stage of the lane-keeping stack, and factor co-occurrence tallies.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lka/error.hpp"
#include "lka/lateral_dynamics.hpp"
#include "lka/telemetry.hpp"

namespace lka {

enum class Component { perception, planning, control };
enum class FailureCategory { perception, planning, control, multi_factor };

inline const char* to_string(Component c) {
  switch (c) {
    case Component::perception: return "perception";
    case Component::planning: return "planning";
    case Component::control: return "control";
  }
  return "?";
}

inline const char* to_string(FailureCategory c) {
  switch (c) {
    case FailureCategory::perception: return "perception";
    case FailureCategory::planning: return "planning";
    case FailureCategory::control: return "control";
    case FailureCategory::multi_factor: return "multi_factor";
  }
  return "?";
}

struct Evidence {
  std::string signal;
  double value = 0.0;
  std::string rule;
};

struct FailureLabel {
  FailureCategory category = FailureCategory::perception;
  std::set<Component> components;
  std::vector<Evidence> evidence;
};

struct DiagnosisConfig {
  double prob_problematic = 0.80;  // perception fires below this minimum
  double prob_clear = 0.90;        // median at or above this is clear detection
  double kappa_ctrl = 0.006;       // [1/m]
  double saturation_fraction = 0.95;
  double lead_in = 1.0;  // [s]
};

/// Largest |dT/dt| between consecutive samples [N·m/s].
inline double torque_rate_estimate(std::span<const TelemetryRecord> window) {
  if (window.size() < 2) throw DomainError("torque_rate_estimate: need at least 2 samples");
  double best = 0.0;
  for (std::size_t i = 1; i < window.size(); ++i) {
    const double dt = window[i].t - window[i - 1].t;
    if (!(dt > 0.0)) throw DomainError("torque_rate_estimate: duplicate timestamps");
    best = std::max(best, std::abs(window[i].steer_torque - window[i - 1].steer_torque) / dt);
  }
  return best;
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline bool is_merge_tag(const std::string& value) {
  return value == "merge" || value == "diverge" || value == "ramp_merge" || value == "merge_diverge";
}

}  // namespace detail

inline FailureLabel diagnose(const Episode& episode, const TelemetryLog& log, const VehicleCapability& cap,
                             const DiagnosisConfig& cfg = {}) {
  if (episode.kind == EpisodeKind::normal) throw DomainError("diagnose: episode is not a failure");
  std::vector<TelemetryRecord> window;
  for (const auto& r : log)
    if (r.t >= episode.t_start - cfg.lead_in && r.t <= episode.t_end) window.push_back(r);
  if (window.empty()) throw DomainError("diagnose: episode window contains no records");

  FailureLabel label;
  std::vector<double> probs;
  double min_prob = 1.0, max_kappa = 0.0, max_torque = 0.0;
  bool bad_level = false, merge_tag = false;
  int worst_level = 1;
  for (const auto& r : window) {
    probs.push_back(r.lane_prob);
    min_prob = std::min(min_prob, r.lane_prob);
    max_kappa = std::max(max_kappa, std::abs(r.kappa));
    max_torque = std::max(max_torque, std::abs(r.steer_torque));
    if (r.detect_level == 0 || r.detect_level == 2) {
      if (!bad_level) worst_level = r.detect_level;
      bad_level = true;
    }
    for (const auto& [key, value] : r.context)
      if (detail::is_merge_tag(value)) merge_tag = true;
  }
  const double median_prob = detail::median(probs);
  const bool clear = median_prob >= cfg.prob_clear;

  // Rate over strictly increasing timestamps only.
  std::vector<TelemetryRecord> distinct;
  for (const auto& r : window)
    if (distinct.empty() || r.t > distinct.back().t) distinct.push_back(r);
  const double rate = distinct.size() >= 2 ? torque_rate_estimate(distinct) : 0.0;

  const bool perception = min_prob < cfg.prob_problematic || bad_level;
  if (perception) {
    label.components.insert(Component::perception);
    if (min_prob < cfg.prob_problematic)
      label.evidence.push_back({"lane_prob_min", min_prob, "perception: lane probability below problematic band"});
    if (bad_level)
      label.evidence.push_back({"detect_level", static_cast<double>(worst_level),
                                "perception: CAN detection level none or ambiguous"});
  }

  const bool torque_pinned = max_torque >= cfg.saturation_fraction * cap.t_max;
  const bool rate_pinned = rate >= cfg.saturation_fraction * cap.dt_dt_max;
  const bool control = clear && max_kappa >= cfg.kappa_ctrl && (torque_pinned || rate_pinned);
  if (control) {
    label.components.insert(Component::control);
    label.evidence.push_back({"kappa_max", max_kappa, "control: curvature at or above control threshold"});
    if (torque_pinned)
      label.evidence.push_back({"steer_torque_max", max_torque, "control: torque at saturation"});
    if (rate_pinned) label.evidence.push_back({"torque_rate_max", rate, "control: torque rate at saturation"});
  }

  if (clear && ((!perception && !control) || merge_tag)) {
    label.components.insert(Component::planning);
    label.evidence.push_back({"lane_prob_median", median_prob,
                              merge_tag ? "planning (heuristic): merge/diverge section with clear detection"
                                        : "planning (heuristic): clear detection, unsaturated control"});
  }

  if (label.components.empty()) {
    // Ambiguous detection without a firing rule.
    label.components.insert(Component::perception);
    label.evidence.push_back({"lane_prob_median", median_prob, "perception (fallback): detection not clear"});
  }

  if (label.components.size() >= 2)
    label.category = FailureCategory::multi_factor;
  else
    switch (*label.components.begin()) {
      case Component::perception: label.category = FailureCategory::perception; break;
      case Component::planning: label.category = FailureCategory::planning; break;
      case Component::control: label.category = FailureCategory::control; break;
    }
  return label;
}

// ---------------------------------------------------------------------------
// Factor tallies

using FactorSet = std::set<std::string>;

/// Context factors of an episode window: tag values mapped onto the factor
/// vocabulary, plus sharp_curve from the curvature signal.
inline FactorSet context_factors(std::span<const TelemetryRecord> window, double sharp_kappa = 0.006) {
  FactorSet out;
  double max_kappa = 0.0;
  for (const auto& r : window) {
    max_kappa = std::max(max_kappa, std::abs(r.kappa));
    for (const auto& [key, value] : r.context) {
      if (value.empty() || value == "none" || value == "clear" || value == "good" || value == "day" ||
          value == "dry" || value == "normal")
        continue;
      if (detail::is_merge_tag(value)) out.insert("merge_diverge");
      else if (key == "road_type") continue;
      else if (value == "faded") out.insert("faded_markings");
      else out.insert(value);
    }
  }
  if (max_kappa >= sharp_kappa) out.insert("sharp_curve");
  return out;
}

struct FactorTally {
  std::map<std::string, std::size_t> single_counts;
  std::map<FactorSet, std::size_t> combo_counts;  // pairs and triples
  std::map<std::string, std::size_t> category_counts;

  /// Entries sorted by count descending, then by name.
  std::vector<std::pair<std::string, std::size_t>> ranked_singles() const {
    std::vector<std::pair<std::string, std::size_t>> v(single_counts.begin(), single_counts.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return v;
  }

  std::vector<std::pair<FactorSet, std::size_t>> ranked_combos() const {
    std::vector<std::pair<FactorSet, std::size_t>> v(combo_counts.begin(), combo_counts.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return v;
  }
};

inline std::string join(const FactorSet& s, const char* sep = "+") {
  std::string out;
  for (const auto& f : s) {
    if (!out.empty()) out += sep;
    out += f;
  }
  return out;
}

inline FactorTally tally_factors(std::span<const std::pair<FailureLabel, FactorSet>> labeled) {
  FactorTally t;
  for (const auto& [label, factors] : labeled) {
    ++t.category_counts[to_string(label.category)];
    const std::vector<std::string> f(factors.begin(), factors.end());
    for (const auto& name : f) ++t.single_counts[name];
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t j = i + 1; j < f.size(); ++j) {
        ++t.combo_counts[{f[i], f[j]}];
        for (std::size_t k = j + 1; k < f.size(); ++k) ++t.combo_counts[{f[i], f[j], f[k]}];
      }
  }
  return t;
}

}  // namespace lka
