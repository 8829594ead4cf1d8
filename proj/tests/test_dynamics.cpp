#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "catch_amalgamated.hpp"
#include "lka/deviation_model.hpp"
#include "lka/lateral_dynamics.hpp"
#include "lka/rng.hpp"

using namespace lka;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

VehicleCapability unit_cap() { return {"unit", 1.0, 3.0, 1.0, 0.5, 2.8}; }

}  // namespace

TEST_CASE("lateral acceleration") {
  CHECK_THAT(lateral_acceleration(20.0, 1.0 / 200.0, 0.0), WithinAbs(2.0, 1e-12));
  CHECK_THAT(lateral_acceleration(20.0, 1.0 / 200.0, 0.05, 9.81), WithinAbs(1.5095, 1e-12));
  CHECK(lateral_acceleration(0.0, 0.3, 0.0) == 0.0);
}

TEST_CASE("steering torque is proportional and unclamped") {
  auto cap = unit_cap();
  CHECK(steering_torque(cap, 2.0) == 2.0);
  cap.k_a = 0.5;
  CHECK(steering_torque(cap, -3.0) == -1.5);
  cap.k_a = 2.0;
  CHECK(steering_torque(cap, 0.0) == 0.0);
  CHECK(steering_torque(cap, 100.0) == 200.0);
}

TEST_CASE("torque rate forms") {
  const auto cap = unit_cap();
  CHECK_THAT(torque_rate_spatial(cap, 30.0, 0.0, 0.0, 1e-5, 0.0), WithinAbs(9e-3, 1e-15));
  CHECK(torque_rate_spatial(cap, 30.0, 0.0, 0.01, 0.0, 0.0) == 0.0);
  CHECK_THAT(torque_rate_temporal(cap, 30.0, 0.0, 0.0, 1e-5, 0.0), WithinAbs(0.27, 1e-14));
  CHECK(torque_rate_temporal(cap, 0.0, 1.0, 0.01, 1e-5, 0.001) == 0.0);
  CHECK_THAT(torque_rate_temporal(cap, 20.0, 1.0, 0.005, 0.0, 0.0), WithinAbs(0.2, 1e-15));
  CHECK_THAT(torque_rate_simplified(cap, 30.0, 1e-5), WithinAbs(0.27, 1e-14));
  CHECK(torque_rate_simplified(cap, 30.0, 0.0) == 0.0);
}

TEST_CASE("simplified rate equals the temporal rate without acceleration or roll change") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    VehicleCapability cap = unit_cap();
    cap.k_a = rng.uniform(0.1, 5.0);
    const double v = rng.uniform(0.0, 45.0), kappa = rng.uniform(-0.05, 0.05), dk = rng.uniform(-1e-3, 1e-3);
    const double full = torque_rate_temporal(cap, v, 0.0, kappa, dk, 0.0);
    const double simple = torque_rate_simplified(cap, v, dk);
    CHECK_THAT(simple, WithinRel(full, 1e-12) || WithinAbs(full, 1e-300));
  }
}

TEST_CASE("rate formulas match finite differences of the torque along a smooth road") {
  const VehicleCapability cap{"c", 1.3, 3.0, 1.0, 0.5, 2.8};
  // Curvature keeps climbing so the rate never crosses zero.
  auto kappa = [](double x) { return 1e-5 * x + 0.0002 * std::sin(x / 50.0); };
  auto dkappa = [](double x) { return 1e-5 + 4e-6 * std::cos(x / 50.0); };
  auto roll = [](double x) { return 0.02 * std::sin(x / 200.0); };
  auto droll = [](double x) { return 1e-4 * std::cos(x / 200.0); };
  const double h = 0.01;

  SECTION("constant speed, temporal form") {
    const double v = 27.0;
    auto torque = [&](double x) { return steering_torque(cap, lateral_acceleration(v, kappa(x), roll(x))); };
    int checked = 0;
    for (double x = 120.0; x < 600.0; x += 7.3) {
      const double fd = v * (torque(x + h) - torque(x - h)) / (2.0 * h);
      const double exact = torque_rate_temporal(cap, v, 0.0, kappa(x), dkappa(x), droll(x));
      CHECK_THAT(fd, WithinRel(exact, 1e-6));
      ++checked;
    }
    CHECK(checked > 60);
  }
  SECTION("varying speed, spatial and temporal forms") {
    auto v = [](double x) { return 18.0 + 0.015 * x; };
    auto dv = [](double) { return 0.015; };
    auto torque = [&](double x) { return steering_torque(cap, lateral_acceleration(v(x), kappa(x), roll(x))); };
    for (double x = 120.0; x < 600.0; x += 7.3) {
      const double fd = (torque(x + h) - torque(x - h)) / (2.0 * h);
      const double spatial = torque_rate_spatial(cap, v(x), dv(x), kappa(x), dkappa(x), droll(x));
      const double temporal = torque_rate_temporal(cap, v(x), v(x) * dv(x), kappa(x), dkappa(x), droll(x));
      CHECK_THAT(fd, WithinRel(spatial, 1e-6));
      CHECK_THAT(temporal, WithinRel(v(x) * spatial, 1e-12));
    }
  }
}

TEST_CASE("required steering angle") {
  VehicleCapability cap = unit_cap();
  cap.wheelbase = 3.0;
  CHECK(required_steering_angle(cap, 0.0) == 0.0);
  CHECK_THAT(required_steering_angle(cap, 0.01), WithinAbs(0.0299910048568779, 1e-15));
  double prev = -1.0;
  for (double k = 0.0; k <= 0.5; k += 0.001) {
    const double a = required_steering_angle(cap, k);
    CHECK(a > prev);
    CHECK(required_steering_angle(cap, -k) == -a);
    prev = a;
  }
}

TEST_CASE("simulator: straight road stays centered") {
  const auto road = build_curve_profile({0.0, 300.0, 0.0, 0.0, 0.0, 0.0, 25.0}, 1.0);
  const auto r = simulate_lka_tracking(unit_cap(), road, 25.0, {});
  CHECK(r.steady_state_deviation == 0.0);
  CHECK(r.saturated_fraction == 0.0);
  CHECK_FALSE(r.diverged);
  CHECK(r.trace.size() == 1201);
  for (const auto& s : r.trace) CHECK(s.lateral_offset == 0.0);
}

TEST_CASE("simulator: feedforward tracks a constant arc under generous limits") {
  const VehicleCapability cap{"generous", 1.0, 1000.0, 1000.0, 0.5, 2.8};
  for (double k : {0.002, 0.005, -0.008}) {
    const auto road = build_curve_profile({k, 50.0, 60.0, 300.0, 50.0, 0.0, 25.0}, 1.0);
    const auto r = simulate_lka_tracking(cap, road, 25.0, {});
    CHECK_FALSE(r.diverged);
    CHECK(std::abs(r.steady_state_deviation) < 0.02);
  }
}

TEST_CASE("simulator: torque saturation drifts outward") {
  // Needed torque 1.0 * 20^2 * 0.008 = 3.2 N*m against a 3 N*m cap.
  const VehicleCapability cap{"tight", 1.0, 3.0, 50.0, 0.5, 2.8};
  for (double k : {0.008, -0.008}) {
    const auto road = build_curve_profile({k, 50.0, 20.0, 60.0, 50.0, 0.0, 20.0}, 1.0);
    const auto r = simulate_lka_tracking(cap, road, 20.0, {});
    CHECK_FALSE(r.diverged);
    CHECK(r.saturated_fraction > 0.0);
    CHECK(r.steady_state_deviation * k < 0.0);
    for (const auto& s : r.trace) CHECK(std::abs(s.torque) <= cap.t_max);
  }
}

TEST_CASE("simulator: trace invariants and rate limit") {
  const VehicleCapability cap{"rate", 1.2, 3.0, 2.0, 0.5, 2.8};
  const auto road = build_curve_profile({0.006, 40.0, 15.0, 80.0, 40.0, 0.02, 22.0}, 0.5);
  const auto r = simulate_lka_tracking(cap, road, 22.0, {3.0, 2.0});
  REQUIRE(r.trace.size() > 2);
  CHECK(r.saturated_fraction >= 0.0);
  CHECK(r.saturated_fraction <= 1.0);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    CHECK(std::abs(r.trace[i].torque) <= cap.t_max);
    CHECK(std::abs(r.trace[i].torque - r.trace[i - 1].torque) <= cap.dt_dt_max * 0.01 * (1.0 + 1e-12));
  }
}

TEST_CASE("simulator: errors and divergence") {
  const auto road = build_curve_profile({0.004, 20.0, 20.0, 20.0, 20.0, 0.0, 25.0}, 1.0);
  const auto cap = unit_cap();
  SimOptions bad;
  bad.dt = 0.0;
  CHECK_THROWS_AS(simulate_lka_tracking(cap, road, 25.0, {}, bad), DomainError);
  bad.dt = 0.2;
  CHECK_THROWS_AS(simulate_lka_tracking(cap, road, 25.0, {}, bad), DomainError);
  CHECK_THROWS_AS(simulate_lka_tracking(cap, road, 0.0, {}), DomainError);
  SimOptions short_run;
  short_run.duration = 1.0;
  CHECK_THROWS_AS(simulate_lka_tracking(cap, road, 25.0, {}, short_run), DomainError);
  VehicleCapability broken = cap;
  broken.t_max = 0.0;
  CHECK_THROWS_AS(simulate_lka_tracking(broken, road, 25.0, {}), DomainError);

  const auto long_road = build_curve_profile({0.004, 200.0, 20.0, 20.0, 600.0, 0.0, 25.0}, 1.0);
  const auto r = simulate_lka_tracking({"c", 1.0, 5.0, 1.0, 0.5, 2.8}, long_road, 25.0, {2.0, -3.0});
  CHECK(r.diverged);
  CHECK(std::abs(r.trace.back().lateral_offset) > 10.0);
}

TEST_CASE("curvature sweep: deviation is linear in curvature and opposite the turn") {
  SweepSpec spec;
  const auto cap = sweep_capability();
  const auto points = run_sweep(cap, spec, {});
  REQUIRE(points.size() == 6);
  std::vector<CurvaturePoint> xy;
  bool rate_limited = false;
  for (const auto& p : points) {
    CHECK_FALSE(p.result.diverged);
    CHECK(p.result.steady_state_deviation < 0.0);
    rate_limited = rate_limited || p.result.saturated_fraction > 0.0;
    xy.push_back({p.kappa, p.result.steady_state_deviation});
  }
  CHECK(rate_limited);
  const auto fit = fit_linear(xy);
  CHECK(fit.slope < 0.0);
  CHECK(fit.r_squared >= 0.9);

  for (auto& k : spec.kappas) k = -k;
  for (const auto& p : run_sweep(cap, spec, {})) CHECK(p.result.steady_state_deviation > 0.0);
}

TEST_CASE("trace csv") {
  const auto road = build_curve_profile({0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 10.0}, 1.0);
  const auto r = simulate_lka_tracking(unit_cap(), road, 10.0, {});
  std::ostringstream out;
  write_trace_csv(out, r);
  const std::string text = out.str();
  CHECK_THAT(text, ContainsSubstring("t_s,x_m,lateral_offset_m,torque_Nm,kappa_inv_m\n"));
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(r.trace.size() + 1));
}
