// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Steering-torque demand along a road and a torque-limited lane-keeping
// simulator. Curvature is used throughout instead of radius (kappa = 1/R),
// which keeps straights finite.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "lka/error.hpp"
#include "lka/road_geometry.hpp"

namespace lka {

inline constexpr double kGravity = 9.81;  // [m/s^2]

/// Actuation limits of one vehicle's lane-keeping system.
struct VehicleCapability {
  std::string name = "generic";
  double k_a = 1.0;        // torque per lateral acceleration [N·m / (m/s^2)]
  double t_max = 3.0;      // [N·m]
  double dt_dt_max = 1.0;  // [N·m/s]
  double delta_max = 0.5;  // road-wheel angle [rad]
  double wheelbase = 2.8;  // [m]
  bool operator==(const VehicleCapability&) const = default;
};

inline void validate(const VehicleCapability& c) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(c.k_a) || !positive(c.t_max) || !positive(c.dt_dt_max) || !positive(c.delta_max) ||
      !positive(c.wheelbase))
    throw DomainError("vehicle capability '" + c.name + "': all limits must be positive");
}

inline double lateral_acceleration(double v, double kappa, double roll, double g = kGravity) {
  return v * v * kappa - g * roll;
}

/// Proportional torque model; deliberately unclamped.
inline double steering_torque(const VehicleCapability& cap, double a_lat) { return cap.k_a * a_lat; }

/// dT/dx [N·m/m] for speed v(x), curvature kappa(x) and roll(x).
inline double torque_rate_spatial(const VehicleCapability& cap, double v, double dv_dx, double kappa,
                                  double dkappa_dx, double droll_dx, double g = kGravity) {
  return cap.k_a * (2.0 * v * dv_dx * kappa + v * v * dkappa_dx - g * droll_dx);
}

/// dT/dt [N·m/s] with longitudinal acceleration a_x = v·dv/dx.
inline double torque_rate_temporal(const VehicleCapability& cap, double v, double a_x, double kappa,
                                   double dkappa_dx, double droll_dx, double g = kGravity) {
  return v * cap.k_a * (2.0 * a_x * kappa + v * v * dkappa_dx - g * droll_dx);
}

/// Constant speed, no roll change: dT/dt = K_a v^3 dkappa/dx.
inline double torque_rate_simplified(const VehicleCapability& cap, double v, double dkappa_dx) {
  return cap.k_a * v * v * v * dkappa_dx;
}

/// Kinematic bicycle: delta = atan(L kappa).
inline double required_steering_angle(const VehicleCapability& cap, double kappa) {
  return std::atan(cap.wheelbase * kappa);
}

// ---------------------------------------------------------------------------
// Closed-loop simulator

/// PD gains on lateral error, in torque units.
struct ControllerGains {
  double kp = 2.0;  // [N·m/m]
  double kd = 1.5;  // [N·m·s/m]

  /// Gains expressed per unit of the vehicle's torque gain, so the closed loop
  /// has the same bandwidth on every vehicle.
  static ControllerGains per_unit(const VehicleCapability& cap, double kp = 2.0, double kd = 1.5) {
    return {kp * cap.k_a, kd * cap.k_a};
  }
};

struct SimState {
  double t = 0.0;               // [s]
  double x = 0.0;               // [m]
  double lateral_offset = 0.0;  // [m], left positive
  double torque = 0.0;          // [N·m]
  double v = 0.0;               // [m/s]
  double kappa = 0.0;           // road curvature at x [1/m]
};

struct SimResult {
  std::vector<SimState> trace;
  double steady_state_deviation = 0.0;  // mean offset over the apex window [m]
  double saturated_fraction = 0.0;
  bool diverged = false;
};

struct SimOptions {
  double dt = 0.01;          // [s]
  double duration = 0.0;     // [s]; 0 means "traverse the whole profile"
  double g = kGravity;
  double divergence_limit = 10.0;  // [m]
};

/// Lateral-error double integrator driven by a torque actuator:
///   e'' = T/K_a - v^2 kappa + g roll
///   T_cmd = -kp e - kd e' + K_a (v^2 kappa - g roll)
/// T follows T_cmd subject to |T| <= t_max and |dT/dt| <= dt_dt_max.
/// Semi-implicit Euler at fixed dt, constant speed v.
inline SimResult simulate_lka_tracking(const VehicleCapability& cap, const RoadProfile& profile,
                                       double v, const ControllerGains& gains,
                                       const SimOptions& opts = {}) {
  validate(cap);
  if (!(opts.dt > 0.0 && opts.dt <= 0.1)) throw DomainError("simulation step must be in (0, 0.1] s");
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("simulation speed must be positive");
  const double traverse = profile.span() / v;
  if (opts.duration > 0.0 && opts.duration * (1.0 + 1e-12) < traverse)
    throw DomainError("simulation duration does not cover the profile at this speed");

  const auto steps = static_cast<std::size_t>(std::floor(traverse / opts.dt + 1e-9));
  const double rate_step = cap.dt_dt_max * opts.dt;
  auto feedforward = [&](const StationSample& s) {
    return cap.k_a * lateral_acceleration(v, s.kappa, s.roll, opts.g);
  };

  SimResult result;
  result.trace.reserve(steps + 1);
  double e = 0.0, e_dot = 0.0;
  StationSample road = profile.at(profile.x_begin());
  double torque = std::clamp(feedforward(road), -cap.t_max, cap.t_max);
  std::size_t saturated = 0;
  result.trace.push_back({0.0, road.x, e, torque, v, road.kappa});

  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = static_cast<double>(k) * opts.dt;
    const double command = -gains.kp * e - gains.kd * e_dot + feedforward(road);
    const double wanted = command - torque;
    double applied = std::clamp(wanted, -rate_step, rate_step);
    bool limited = applied != wanted;
    double next = torque + applied;
    if (std::abs(next) > cap.t_max) {
      next = std::clamp(next, -cap.t_max, cap.t_max);
      limited = true;
    }
    torque = next;
    if (limited) ++saturated;

    const double accel = torque / cap.k_a - v * v * road.kappa + opts.g * road.roll;
    e_dot += accel * opts.dt;
    e += e_dot * opts.dt;

    road = profile.at(profile.x_begin() + v * t);
    result.trace.push_back({t, road.x, e, torque, v, road.kappa});
    if (!std::isfinite(e) || std::abs(e) > opts.divergence_limit) {
      result.diverged = true;
      break;
    }
  }
  const std::size_t taken = result.trace.size() - 1;
  result.saturated_fraction = taken ? static_cast<double>(saturated) / static_cast<double>(taken) : 0.0;

  // Mean offset over the stations of the profile's apex window.
  double lo = profile.x_begin(), hi = profile.x_end();
  const auto kappas = profile.kappas();
  const bool has_curve =
      std::any_of(kappas.begin(), kappas.end(), [](double k) { return k != 0.0; });
  if (has_curve) {
    const auto window = extract_apex_window(std::span<const double>(kappas));
    lo = profile[window.begin].x;
    hi = profile[window.end - 1].x;
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : result.trace) {
    if (s.x >= lo && s.x <= hi) {
      sum += s.lateral_offset;
      ++count;
    }
  }
  result.steady_state_deviation = count ? sum / static_cast<double>(count) : 0.0;
  return result;
}

// ---------------------------------------------------------------------------
// Curvature sweep

/// Short bends (clothoid in, clothoid out, no constant arc). On long
/// constant-curvature arcs the rate-limited PD loop falls into a limit cycle,
/// so the sweep measures the offset at the apex of a brief bend instead.
struct SweepSpec {
  std::vector<double> kappas = {0.002, 0.004, 0.006, 0.008, 0.010, 0.012};
  double speed = 30.0;  // [m/s]
  CurveSpec shape{0.0, 50.0, 5.0, 0.0, 200.0, 0.0, 30.0};
  double dx = 1.0;  // [m]
};

/// Capability used when a sweep is run without one.
inline VehicleCapability sweep_capability() { return {"sweep-default", 1.0, 5.0, 5.0, 0.5, 2.8}; }

struct SweepPoint {
  double kappa = 0.0;
  SimResult result;
  double max_abs_offset = 0.0;
};

inline std::vector<SweepPoint> run_sweep(const VehicleCapability& cap, const SweepSpec& spec,
                                         const ControllerGains& gains, const SimOptions& opts = {}) {
  if (spec.kappas.empty()) throw DomainError("sweep has no curvature values");
  std::vector<SweepPoint> out;
  out.reserve(spec.kappas.size());
  for (double k : spec.kappas) {
    CurveSpec shape = spec.shape;
    shape.kappa = k;
    shape.posted_speed = spec.speed;
    const auto profile = build_curve_profile(shape, spec.dx, "sweep");
    SweepPoint p{k, simulate_lka_tracking(cap, profile, spec.speed, gains, opts), 0.0};
    for (const auto& s : p.result.trace) p.max_abs_offset = std::max(p.max_abs_offset, std::abs(s.lateral_offset));
    out.push_back(std::move(p));
  }
  return out;
}

/// Trace as CSV: t_s,x_m,lateral_offset_m,torque_Nm,kappa_inv_m
inline void write_trace_csv(std::ostream& out, const SimResult& r) {
  out << "t_s,x_m,lateral_offset_m,torque_Nm,kappa_inv_m\n";
  char buf[160];
  for (const auto& s : r.trace) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.9g,%.9g,%.9g\n", s.t, s.x, s.lateral_offset, s.torque,
                  s.kappa);
    out << buf;
  }
}

}  // namespace lka
