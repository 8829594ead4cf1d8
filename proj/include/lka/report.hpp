// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Report output: atomic file writes and the markdown audit table.

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "lka/design_rules.hpp"
#include "lka/error.hpp"

namespace lka::report {

/// Writes to a sibling temporary file, then renames over the target, so a
/// reader never sees a partial file.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw Error("write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

namespace detail {

inline std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

}  // namespace detail

/// Rule statements with the capability and design speed substituted.
inline std::string rule_text(const VehicleCapability& cap, double v, const AuditOptions& opts = {}) {
  using detail::fmt;
  std::ostringstream s;
  const double r_torque = v * v / (cap.t_max / cap.k_a);
  const double r_angle = cap.wheelbase / std::tan(cap.delta_max);
  const double ls_per_mk = min_transition_length(cap, v, 0.001);
  const double roll_rate = opts.roll_budget * cap.dt_dt_max / (cap.k_a * v * opts.g);
  s << "- **R-1 minimum radius.** R >= max(v^2 / (T_max/K_a + g*roll), L / tan(delta_max)). At v = " << fmt(v)
    << " m/s on a flat section: max(" << fmt(r_torque) << ", " << fmt(r_angle) << ") = "
    << fmt(std::max(r_torque, r_angle)) << " m.\n";
  s << "- **R-2 transition length.** L_s >= K_a * v^3 * |delta kappa| / (dT/dt)_max. At v = " << fmt(v)
    << " m/s: " << fmt(ls_per_mk) << " m per 0.001 1/m of curvature change.\n";
  s << "- **R-3 superelevation gradient.** |d roll/dx| <= " << fmt(opts.roll_budget) << " * (dT/dt)_max / (K_a * v * g)"
    << " = " << fmt(roll_rate) << " rad/m at v = " << fmt(v) << " m/s.\n";
  s << "- **R-4 advisory speed.** v_adv = min(sqrt((T_max/K_a + g*roll) / kappa_max), cbrt((dT/dt)_max / (K_a * "
       "kappa'_max))) with T_max = "
    << fmt(cap.t_max) << " N*m, (dT/dt)_max = " << fmt(cap.dt_dt_max) << " N*m/s, K_a = " << fmt(cap.k_a) << ".\n";
  return s.str();
}

inline std::string audit_markdown(const AuditReport& r, const VehicleCapability& cap, const AuditOptions& opts = {}) {
  using detail::fmt;
  std::ostringstream s;
  s << "# Geometry audit: " << r.profile_name << "\n\n";
  s << "Capability `" << r.capability_name << "`, speed mode " << r.speed_mode << ", design speed "
    << fmt(r.speed_used) << " m/s.\n\n";
  s << "## Rules\n\n" << rule_text(cap, r.speed_used, opts) << '\n';
  s << "## Findings\n\n";
  if (r.findings.empty()) {
    s << "No findings.\n";
    return s.str();
  }
  s << "| Rule | Severity | From [m] | To [m] | Required | Actual | Unit |\n";
  s << "|---|---|---:|---:|---:|---:|---|\n";
  for (const auto& f : r.findings)
    s << "| " << to_string(f.rule) << " | " << to_string(f.severity) << " | " << fmt(f.x_start, 6) << " | "
      << fmt(f.x_end, 6) << " | " << fmt(f.required_value) << " | " << fmt(f.actual_value) << " | " << f.unit
      << " |\n";
  s << '\n' << r.violations() << " violation(s), " << r.findings.size() - r.violations() << " advisory finding(s).\n";
  return s.str();
}

}  // namespace lka::report
