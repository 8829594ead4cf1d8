#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "catch_amalgamated.hpp"
#include "lka/rng.hpp"
#include "lka/telemetry.hpp"

using namespace lka;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

const char* kHeader =
    "t_s,v_mps,d_left_m,d_right_m,lka_engaged,detect_level,lane_prob,steer_angle_rad,steer_torque_Nm,kappa_inv_m";

TelemetryLog parse(const std::string& body, const std::string& header = kHeader) {
  std::istringstream in(header + "\n" + body);
  return parse_log(in);
}

TelemetryRecord centered(double t, double deviation, int engaged = 1) {
  TelemetryRecord r;
  r.t = t;
  r.v = 25.0;
  r.d_left = 1.8 + deviation;
  r.d_right = -1.8 + deviation;
  r.lka_engaged = engaged;
  return r;
}

int rank(DetectionQuality q) {
  switch (q) {
    case DetectionQuality::normal: return 0;
    case DetectionQuality::ambiguous: return 1;
    default: return 2;
  }
}

}  // namespace

TEST_CASE("telemetry csv") {
  SECTION("well-formed rows") {
    auto log = parse(
        "0,25,1.8,-1.8,1,1,0.97,0,0.1,0\n"
        "0.1,25,1.8,-1.8,1,1,0.97,0,0.1,0\n"
        "0.2,25,1.8,-1.8,1,2,0.85,0,0.1,0.001\n"
        "0.3,25,1.8,-1.8,0,0,0.5,0,0.1,0.001\n"
        "0.3,25,1.8,-1.8,0,3,0.99,0,0.1,0.001\n");
    REQUIRE(log.size() == 5);
    CHECK(log[2].detect_level == 2);
    CHECK(log[3].lka_engaged == 0);
    CHECK(log[4].lane_prob == 0.99);
  }
  SECTION("context columns become tags") {
    auto log = parse("0,25,1.8,-1.8,1,1,0.97,0,0.1,0,rain,\n",
                     std::string(kHeader) + ",ctx_weather,ctx_lighting");
    CHECK(log[0].context.at("weather") == "rain");
    CHECK(log[0].context.count("lighting") == 0);
  }
  SECTION("detect level out of range") {
    CHECK_THROWS_AS(parse("0,25,1.8,-1.8,1,4,0.97,0,0.1,0\n"), ParseError);
  }
  SECTION("timestamp regression names the row") {
    try {
      parse("0,25,1.8,-1.8,1,1,0.97,0,0.1,0\n0.2,25,1.8,-1.8,1,1,0.97,0,0.1,0\n0.1,25,1.8,-1.8,1,1,0.97,0,0.1,0\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.row() == 3);
    }
  }
  SECTION("other malformed input") {
    CHECK_THROWS_AS(parse("0,25,1.8,-1.8,2,1,0.97,0,0.1,0\n"), ParseError);
    CHECK_THROWS_AS(parse("0,25,1.8,-1.8,1,1,1.2,0,0.1,0\n"), ParseError);
    CHECK_THROWS_AS(parse("0,25,1.8,-1.8,1,1,0.9\n"), ParseError);
    CHECK_THROWS_AS(parse("0,25,abc,-1.8,1,1,0.97,0,0.1,0\n"), ParseError);
    std::istringstream empty("");
    CHECK_THROWS_AS(parse_log(empty), ParseError);
  }
}

TEST_CASE("lane deviation") {
  TelemetryRecord r;
  r.d_left = 1.8, r.d_right = -1.8;
  CHECK(lane_deviation(r) == 0.0);
  r.d_left = 2.0, r.d_right = -1.6;
  CHECK_THAT(lane_deviation(r), WithinAbs(0.2, 1e-15));
  r.d_left = 1.0, r.d_right = -2.6;
  CHECK_THAT(lane_deviation(r), WithinAbs(-0.8, 1e-15));

  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    TelemetryRecord a;
    a.d_left = rng.uniform(-1.0, 3.0);
    a.d_right = rng.uniform(-3.0, 1.0);
    TelemetryRecord m = a;
    m.d_left = -a.d_right;
    m.d_right = -a.d_left;
    CHECK(lane_deviation(m) == -lane_deviation(a));
  }
}

TEST_CASE("detection quality from CAN levels") {
  CHECK(detection_status_from_can(0).status == DetectionQuality::none);
  CHECK(detection_status_from_can(1).status == DetectionQuality::normal);
  CHECK(detection_status_from_can(2).status == DetectionQuality::ambiguous);
  CHECK(detection_status_from_can(3).status == DetectionQuality::special);
  for (int level = 0; level <= 3; ++level) {
    const auto s = detection_status_from_can(level);
    CHECK(s.source == DetectionSource::vehicle_can);
    CHECK(s.status != DetectionQuality::problematic);
  }
  CHECK_THROWS_AS(detection_status_from_can(4), DomainError);
  CHECK_THROWS_AS(detection_status_from_can(-1), DomainError);
}

TEST_CASE("detection quality from lane probability") {
  CHECK(detection_status_from_prob(0.95).status == DetectionQuality::normal);
  CHECK(detection_status_from_prob(0.90).status == DetectionQuality::normal);
  CHECK(detection_status_from_prob(0.85).status == DetectionQuality::ambiguous);
  CHECK(detection_status_from_prob(0.80).status == DetectionQuality::ambiguous);
  CHECK(detection_status_from_prob(0.79).status == DetectionQuality::problematic);

  int prev = 0;
  for (int i = 1000; i >= 0; --i) {
    const auto s = detection_status_from_prob(i / 1000.0);
    CHECK(s.source == DetectionSource::vision_model);
    CHECK(s.status != DetectionQuality::none);
    CHECK(s.status != DetectionQuality::special);
    CHECK(rank(s.status) >= prev);
    prev = rank(s.status);
  }
}

TEST_CASE("deviation classes use strict thresholds") {
  CHECK(classify_deviation(0.24) == DeviationClass::normal);
  CHECK(classify_deviation(0.25) == DeviationClass::normal);
  CHECK(classify_deviation(0.26) == DeviationClass::anomaly);
  CHECK(classify_deviation(-0.26) == DeviationClass::anomaly);
  CHECK(classify_deviation(0.64) == DeviationClass::anomaly);
  CHECK(classify_deviation(0.65) == DeviationClass::anomaly);
  CHECK(classify_deviation(0.66) == DeviationClass::critical);
}

TEST_CASE("episode segmentation") {
  SECTION("steady small offset is one normal episode") {
    TelemetryLog log;
    for (int i = 0; i <= 100; ++i) log.push_back(centered(i * 0.1, 0.1));
    const auto eps = segment_episodes(log);
    REQUIRE(eps.size() == 1);
    CHECK(eps[0].kind == EpisodeKind::normal);
    CHECK(eps[0].first == 0);
    CHECK(eps[0].last == log.size());
  }
  SECTION("triangular excursion to 0.3 m") {
    TelemetryLog log;
    for (int i = 0; i <= 100; ++i) {
      const double t = i / 10.0;
      log.push_back(centered(t, std::max(0.0, 0.3 - 0.3 * std::abs(t - 5.0))));
    }
    const auto eps = segment_episodes(log);
    REQUIRE(eps.size() == 3);
    CHECK(eps[1].kind == EpisodeKind::deviation);
    CHECK_FALSE(eps[1].critical);
    CHECK_THAT(eps[1].t_start, WithinAbs(4.9, 1e-12));
    CHECK_THAT(eps[1].t_end, WithinAbs(5.1, 1e-12));
    CHECK_THAT(eps[1].peak_deviation, WithinAbs(0.3, 1e-12));
  }
  SECTION("disengagement at t = 5 lasts until re-engagement") {
    TelemetryLog log;
    for (int i = 0; i <= 100; ++i) {
      const double t = i / 10.0;
      log.push_back(centered(t, 0.0, (t >= 5.0 - 1e-9 && t < 7.0 - 1e-9) ? 0 : 1));
    }
    const auto eps = segment_episodes(log);
    REQUIRE(eps.size() == 3);
    CHECK(eps[1].kind == EpisodeKind::disengagement);
    CHECK(eps[1].critical);
    CHECK_THAT(eps[1].t_start, WithinAbs(5.0, 1e-12));
    CHECK_THAT(eps[1].t_end, WithinAbs(6.9, 1e-12));
  }
  SECTION("critical deviation") {
    TelemetryLog log;
    for (int i = 0; i < 20; ++i) log.push_back(centered(i * 0.1, i >= 5 && i < 10 ? -0.7 : 0.0));
    const auto eps = segment_episodes(log);
    REQUIRE(eps.size() == 3);
    CHECK(eps[1].critical);
  }
  SECTION("short gaps merge, long gaps do not") {
    auto build = [](double gap) {
      TelemetryLog log;
      double t = 0.0;
      for (int i = 0; i < 10; ++i, t += 0.1) log.push_back(centered(t, 0.0));
      for (int i = 0; i < 5; ++i, t += 0.1) log.push_back(centered(t, 0.4));
      const int quiet = static_cast<int>(std::lround(gap / 0.1)) - 1;
      for (int i = 0; i < quiet; ++i, t += 0.1) log.push_back(centered(t, 0.0));
      for (int i = 0; i < 5; ++i, t += 0.1) log.push_back(centered(t, 0.4));
      for (int i = 0; i < 10; ++i, t += 0.1) log.push_back(centered(t, 0.0));
      return segment_episodes(log);
    };
    CHECK(build(0.5).size() == 3);
    CHECK(build(1.5).size() == 5);
  }
  SECTION("infinite threshold and no disengagement") {
    Rng rng(1);
    TelemetryLog log;
    for (int i = 0; i < 200; ++i) log.push_back(centered(i * 0.05, rng.uniform(-2.0, 2.0)));
    SegmentOptions opts;
    opts.deviation_threshold = std::numeric_limits<double>::infinity();
    opts.critical_threshold = std::numeric_limits<double>::infinity();
    const auto eps = segment_episodes(log, opts);
    REQUIRE(eps.size() == 1);
    CHECK(eps[0].kind == EpisodeKind::normal);
  }
  SECTION("empty log") {
    CHECK_THROWS_AS(segment_episodes({}), DomainError);
  }
}

TEST_CASE("episodes partition the log") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    TelemetryLog log;
    int engaged = 1;
    for (int i = 0; i < 300; ++i) {
      if (rng.bernoulli(0.03)) engaged = 1 - engaged;
      log.push_back(centered(i * 0.1, rng.bernoulli(0.1) ? rng.uniform(-0.9, 0.9) : 0.05, engaged));
    }
    const auto eps = segment_episodes(log);
    std::size_t next = 0;
    for (const auto& e : eps) {
      CHECK(e.first == next);
      CHECK(e.last > e.first);
      CHECK(e.t_start <= e.t_end);
      if (e.kind == EpisodeKind::deviation) CHECK(e.peak_deviation > 0.25);
      next = e.last;
    }
    CHECK(next == log.size());
  }
}

namespace {

std::vector<std::vector<Episode>> pool_of(std::size_t failures, std::size_t normals) {
  std::vector<Episode> eps;
  for (std::size_t i = 0; i < failures; ++i) eps.push_back({EpisodeKind::deviation, 1000.0 + i, 1000.0 + i, 0.4});
  for (std::size_t i = 0; i < normals; ++i) eps.push_back({EpisodeKind::normal, double(i), double(i), 0.0});
  return {eps};
}

}  // namespace

TEST_CASE("curation") {
  SECTION("ten failures, one hundred normals, seed 7") {
    const auto r = curate(pool_of(10, 100), 1.0, 7);
    CHECK(r.failures.size() == 10);
    REQUIRE(r.normals.size() == 10);
    const std::vector<double> expected = {15, 52, 94, 7, 65, 28, 29, 53, 21, 87};
    for (std::size_t i = 0; i < 10; ++i) CHECK(r.normals[i].episode.t_start == expected[i]);
    CHECK(r.warnings.empty());

    const auto again = curate(pool_of(10, 100), 1.0, 7);
    for (std::size_t i = 0; i < 10; ++i) CHECK(again.normals[i].episode.t_start == r.normals[i].episode.t_start);
  }
  SECTION("ratio scales the sample") {
    CHECK(curate(pool_of(10, 100), 0.5, 7).normals.size() == 5);
    CHECK(curate(pool_of(10, 100), 0.0, 7).normals.empty());
  }
  SECTION("no failures") {
    const auto r = curate(pool_of(0, 20), 1.0, 7);
    CHECK(r.failures.empty());
    CHECK(r.normals.empty());
    REQUIRE_FALSE(r.warnings.empty());
    CHECK_THAT(r.warnings[0], ContainsSubstring("no failure"));
  }
  SECTION("not enough normals") {
    const auto r = curate(pool_of(10, 4), 1.0, 7);
    CHECK(r.normals.size() == 4);
    CHECK(r.warnings.size() == 1);
  }
  SECTION("errors") {
    CHECK_THROWS_AS(curate({}, 1.0, 7), DomainError);
    CHECK_THROWS_AS(curate(pool_of(1, 1), 1.5, 7), DomainError);
  }
  SECTION("multiple logs keep their index") {
    auto logs = pool_of(2, 0);
    logs.push_back(pool_of(1, 5)[0]);
    const auto r = curate(logs, 1.0, 3);
    CHECK(r.failures.size() == 3);
    CHECK(r.failures[2].log_index == 1);
    for (const auto& n : r.normals) CHECK(n.log_index == 1);
  }
}
