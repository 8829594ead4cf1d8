// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// LKA telemetry logs: loading, lane deviation, detection-quality bands and
// episode segmentation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lka/csv.hpp"
#include "lka/error.hpp"
#include "lka/rng.hpp"

namespace lka {

/// One log row. Laneline offsets are signed: the left line sits at
/// d_left >= 0 and the right line at d_right <= 0 while in lane.
struct TelemetryRecord {
  double t = 0.0;
  double v = 0.0;
  double d_left = 0.0;
  double d_right = 0.0;
  int lka_engaged = 1;
  int detect_level = 1;
  double lane_prob = 1.0;
  double steer_angle = 0.0;
  double steer_torque = 0.0;
  double kappa = 0.0;
  std::map<std::string, std::string> context;  // ctx_ columns without the prefix
};

using TelemetryLog = std::vector<TelemetryRecord>;

inline const std::vector<std::string>& telemetry_columns() {
  static const std::vector<std::string> cols = {"t_s",        "v_mps",      "d_left_m",        "d_right_m",
                                                "lka_engaged", "detect_level", "lane_prob",     "steer_angle_rad",
                                                "steer_torque_Nm", "kappa_inv_m"};
  return cols;
}

inline TelemetryLog parse_log(std::istream& in) {
  const auto table = csv::Table::read(in);
  if (table.header().empty()) throw ParseError("telemetry file is empty");
  table.require(telemetry_columns());

  std::vector<std::string> ctx_columns;
  for (const auto& h : table.header())
    if (h.rfind("ctx_", 0) == 0) ctx_columns.push_back(h);

  TelemetryLog log;
  log.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto row = table.row(i);
    TelemetryRecord r;
    r.t = row.number_at("t_s");
    r.v = row.number_at("v_mps");
    r.d_left = row.number_at("d_left_m");
    r.d_right = row.number_at("d_right_m");
    const long engaged = row.integer_at("lka_engaged");
    if (engaged != 0 && engaged != 1) throw ParseError("lka_engaged must be 0 or 1", row.number);
    r.lka_engaged = static_cast<int>(engaged);
    const long level = row.integer_at("detect_level");
    if (level < 0 || level > 3) throw ParseError("detect_level must be in 0..3", row.number);
    r.detect_level = static_cast<int>(level);
    r.lane_prob = row.number_at("lane_prob");
    if (r.lane_prob < 0.0 || r.lane_prob > 1.0) throw ParseError("lane_prob must be in [0, 1]", row.number);
    r.steer_angle = row.number_at("steer_angle_rad");
    r.steer_torque = row.number_at("steer_torque_Nm");
    r.kappa = row.number_at("kappa_inv_m");
    for (const auto& c : ctx_columns) {
      const auto& value = row.text(c);
      if (!value.empty()) r.context[c.substr(4)] = value;
    }
    if (!log.empty() && r.t < log.back().t)
      throw ParseError("timestamp regression: t = " + row.text("t_s") + " precedes previous row", row.number);
    log.push_back(std::move(r));
  }
  return log;
}

inline TelemetryLog load_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open telemetry file '" + path + "'");
  return parse_log(in);
}

/// Lane-center offset of the vehicle, left positive.
inline double lane_deviation(const TelemetryRecord& r) { return (r.d_left + r.d_right) / 2.0; }

// ---------------------------------------------------------------------------
// Detection quality

enum class DetectionSource { vehicle_can, vision_model };
enum class DetectionQuality { normal, ambiguous, problematic, none, special };

struct DetectionStatus {
  DetectionSource source;
  DetectionQuality status;
  bool operator==(const DetectionStatus&) const = default;
};

inline const char* to_string(DetectionQuality q) {
  switch (q) {
    case DetectionQuality::normal: return "normal";
    case DetectionQuality::ambiguous: return "ambiguous";
    case DetectionQuality::problematic: return "problematic";
    case DetectionQuality::none: return "none";
    case DetectionQuality::special: return "special";
  }
  return "?";
}

inline DetectionStatus detection_status_from_can(int level) {
  static constexpr DetectionQuality table[] = {DetectionQuality::none, DetectionQuality::normal,
                                               DetectionQuality::ambiguous, DetectionQuality::special};
  if (level < 0 || level > 3) throw DomainError("CAN lane detection level must be in 0..3");
  return {DetectionSource::vehicle_can, table[level]};
}

inline constexpr double kProbNormal = 0.90;
inline constexpr double kProbAmbiguous = 0.80;

inline DetectionStatus detection_status_from_prob(double p) {
  if (p >= kProbNormal) return {DetectionSource::vision_model, DetectionQuality::normal};
  if (p >= kProbAmbiguous) return {DetectionSource::vision_model, DetectionQuality::ambiguous};
  return {DetectionSource::vision_model, DetectionQuality::problematic};
}

// ---------------------------------------------------------------------------
// Episodes

enum class EpisodeKind { normal, deviation, disengagement };

inline const char* to_string(EpisodeKind k) {
  switch (k) {
    case EpisodeKind::normal: return "normal";
    case EpisodeKind::deviation: return "deviation";
    case EpisodeKind::disengagement: return "disengagement";
  }
  return "?";
}

/// Severity of a single deviation sample.
enum class DeviationClass { normal, anomaly, critical };

inline const char* to_string(DeviationClass c) {
  switch (c) {
    case DeviationClass::normal: return "normal";
    case DeviationClass::anomaly: return "anomaly";
    case DeviationClass::critical: return "critical";
  }
  return "?";
}

struct SegmentOptions {
  double deviation_threshold = 0.25;  // anomaly when |dev| > this [m]
  double critical_threshold = 0.65;   // critical when |dev| > this [m]
  double min_gap = 1.0;               // same-kind windows closer than this merge [s]
};

inline DeviationClass classify_deviation(double deviation, const SegmentOptions& opts = {}) {
  const double a = std::abs(deviation);
  if (a > opts.critical_threshold) return DeviationClass::critical;
  if (a > opts.deviation_threshold) return DeviationClass::anomaly;
  return DeviationClass::normal;
}

struct Episode {
  EpisodeKind kind = EpisodeKind::normal;
  double t_start = 0.0;
  double t_end = 0.0;
  double peak_deviation = 0.0;  // max |lane deviation| inside the episode [m]
  bool critical = false;
  std::size_t first = 0;  // record indices [first, last)
  std::size_t last = 0;
};

/// Splits a log into consecutive episodes covering every record once.
/// A 1->0 engagement transition opens a disengagement that lasts until
/// re-engagement; otherwise records with |deviation| above the threshold form
/// deviation windows. Same-kind windows separated by less than min_gap merge.
inline std::vector<Episode> segment_episodes(const TelemetryLog& log, const SegmentOptions& opts = {}) {
  if (log.empty()) throw DomainError("segment_episodes: empty log");
  const std::size_t n = log.size();

  std::vector<EpisodeKind> label(n, EpisodeKind::normal);
  bool disengaged = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && log[i - 1].lka_engaged == 1 && log[i].lka_engaged == 0) disengaged = true;
    if (log[i].lka_engaged == 1) disengaged = false;
    if (disengaged)
      label[i] = EpisodeKind::disengagement;
    else if (classify_deviation(lane_deviation(log[i]), opts) != DeviationClass::normal)
      label[i] = EpisodeKind::deviation;
  }

  struct Run {
    EpisodeKind kind;
    std::size_t first, last;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < n; ++i) {
    if (!runs.empty() && runs.back().kind == label[i])
      runs.back().last = i + 1;
    else
      runs.push_back({label[i], i, i + 1});
  }

  // Absorb short normal gaps between two windows of the same failure kind.
  std::vector<Run> merged;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const Run& r = runs[k];
    if (r.kind == EpisodeKind::normal && !merged.empty() && k + 1 < runs.size() &&
        merged.back().kind != EpisodeKind::normal && runs[k + 1].kind == merged.back().kind) {
      const double gap = log[runs[k + 1].first].t - log[merged.back().last - 1].t;
      if (gap < opts.min_gap) {
        merged.back().last = runs[k + 1].last;
        ++k;
        continue;
      }
    }
    merged.push_back(r);
  }

  std::vector<Episode> out;
  out.reserve(merged.size());
  for (const auto& r : merged) {
    Episode e;
    e.kind = r.kind;
    e.first = r.first;
    e.last = r.last;
    e.t_start = log[r.first].t;
    e.t_end = log[r.last - 1].t;
    for (std::size_t i = r.first; i < r.last; ++i)
      e.peak_deviation = std::max(e.peak_deviation, std::abs(lane_deviation(log[i])));
    e.critical = r.kind == EpisodeKind::disengagement ||
                 (r.kind == EpisodeKind::deviation && e.peak_deviation > opts.critical_threshold);
    out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Curation

struct CuratedEpisode {
  std::size_t log_index = 0;
  Episode episode;
};

struct CurationResult {
  std::vector<CuratedEpisode> failures;
  std::vector<CuratedEpisode> normals;
  std::vector<std::string> warnings;
};

/// All failure episodes, plus a seeded sample of normal episodes sized to
/// round(ratio * failures), capped by what is available.
inline CurationResult curate(const std::vector<std::vector<Episode>>& episodes_per_log, double normal_sample_ratio,
                             std::uint64_t seed) {
  if (episodes_per_log.empty()) throw DomainError("curate: no logs");
  if (!(normal_sample_ratio >= 0.0 && normal_sample_ratio <= 1.0))
    throw DomainError("curate: normal sample ratio must be in [0, 1]");
  CurationResult result;
  std::vector<CuratedEpisode> pool;
  for (std::size_t li = 0; li < episodes_per_log.size(); ++li) {
    for (const auto& e : episodes_per_log[li]) {
      if (e.kind == EpisodeKind::normal)
        pool.push_back({li, e});
      else
        result.failures.push_back({li, e});
    }
  }
  if (result.failures.empty()) result.warnings.push_back("no failure episodes found");
  auto wanted = static_cast<std::size_t>(std::llround(normal_sample_ratio * static_cast<double>(result.failures.size())));
  if (pool.empty() && wanted > 0) result.warnings.push_back("no normal episodes available to sample");
  if (wanted > pool.size()) {
    if (!pool.empty())
      result.warnings.push_back("only " + std::to_string(pool.size()) + " normal episodes available, " +
                                std::to_string(wanted) + " requested");
    wanted = pool.size();
  }
  // Partial Fisher-Yates; the chosen prefix keeps draw order.
  Rng rng(seed);
  for (std::size_t i = 0; i < wanted; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  result.normals.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(wanted));
  return result;
}

inline CurationResult curate_logs(const std::vector<TelemetryLog>& logs, double normal_sample_ratio,
                                  std::uint64_t seed, const SegmentOptions& opts = {}) {
  std::vector<std::vector<Episode>> episodes;
  episodes.reserve(logs.size());
  for (const auto& log : logs) episodes.push_back(segment_episodes(log, opts));
  return curate(episodes, normal_sample_ratio, seed);
}

}  // namespace lka
