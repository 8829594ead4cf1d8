// Hand-built inputs shared by the unit tests and the acceptance runner.

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lka/csv.hpp"
#include "lka/failure_diagnosis.hpp"

namespace fixtures {

inline lka::FailureCategory category_from(const std::string& s) {
  using lka::FailureCategory;
  if (s == "perception") return FailureCategory::perception;
  if (s == "planning") return FailureCategory::planning;
  if (s == "control") return FailureCategory::control;
  return FailureCategory::multi_factor;
}

inline std::vector<std::pair<lka::FailureLabel, lka::FactorSet>> factor_episodes(const std::string& path) {
  const auto table = lka::csv::Table::read_file(path);
  std::vector<std::pair<lka::FailureLabel, lka::FactorSet>> out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto row = table.row(i);
    lka::FailureLabel label;
    label.category = category_from(row.text("category"));
    lka::FactorSet factors;
    std::string cell = row.text("factors");
    std::size_t start = 0;
    while (start <= cell.size()) {
      const auto end = cell.find(';', start);
      const auto piece = cell.substr(start, end == std::string::npos ? std::string::npos : end - start);
      if (!piece.empty()) factors.insert(piece);
      if (end == std::string::npos) break;
      start = end + 1;
    }
    out.emplace_back(label, factors);
  }
  return out;
}

struct Window {
  double lane_prob = 0.97;
  double prob_dip = 1.0;  // minimum lane_prob reached mid-episode
  double kappa = 0.001;
  double torque = 0.5;
  double deviation = 0.4;
  std::string road_type = "highway";
};

/// Ten seconds at 10 Hz with a deviation episode over 4..6 s. Returns the
/// log and the episode.
inline std::pair<lka::TelemetryLog, lka::Episode> failure_window(const Window& w) {
  lka::TelemetryLog log;
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 10.0;
    const bool inside = t >= 4.0 - 1e-9 && t <= 6.0 + 1e-9;
    lka::TelemetryRecord r;
    r.t = t;
    r.v = 25.0;
    const double dev = inside ? w.deviation : 0.0;
    r.d_left = 1.8 + dev;
    r.d_right = -1.8 + dev;
    r.lane_prob = (t >= 4.5 - 1e-9 && t <= 5.0 + 1e-9) ? w.prob_dip : w.lane_prob;
    r.detect_level = 1;
    r.kappa = w.kappa;
    r.steer_torque = inside ? w.torque : 0.5 * w.torque;
    r.context["road_type"] = w.road_type;
    log.push_back(r);
  }
  lka::Episode e;
  e.kind = lka::EpisodeKind::deviation;
  e.t_start = 4.0;
  e.t_end = 6.0;
  e.peak_deviation = std::abs(w.deviation);
  e.first = 40;
  e.last = 61;
  return {log, e};
}

inline lka::VehicleCapability diagnosis_cap() { return {"compact-sedan", 1.2, 3.0, 2.0, 0.5, 2.8}; }

inline Window perception_case() {
  Window w;
  w.prob_dip = 0.6;
  w.deviation = -0.4;
  return w;
}

inline Window control_case() {
  Window w;
  w.kappa = 0.009;
  w.torque = 3.0;
  w.deviation = -1.2;
  return w;
}

inline Window planning_case() {
  Window w;
  w.road_type = "ramp_merge";
  w.deviation = 0.4;
  return w;
}

inline Window perception_and_control_case() {
  Window w = control_case();
  w.prob_dip = 0.6;
  return w;
}

}  // namespace fixtures
