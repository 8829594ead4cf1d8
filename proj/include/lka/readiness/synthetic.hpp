// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic readiness data. The rule table is invented; its constants come
// from published field numbers: the curvature slope of the deviation fit,
// the 0.25 m deviation class boundary, a 0.006 1/m curvature knee and a
// 60.7 mph (27.136 m/s) speed knee.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lka/error.hpp"
#include "lka/readiness/features.hpp"
#include "lka/rng.hpp"

namespace lka::readiness {

struct LevelRule {
  std::string name;
  double probability = 0.0;
  double multiplier = 1.0;  // scales the deviation magnitude
  bool adverse = false;     // enables the curvature term of the disengagement hazard
  bool operator==(const LevelRule&) const = default;
};

inline constexpr int kGeneratorConfigVersion = 1;

struct GeneratorConfig {
  int version = kGeneratorConfigVersion;

  double kappa_max = 0.015;  // |kappa| ~ U[0, kappa_max]
  double speed_mean = 24.0;
  double speed_sd = 4.0;
  double speed_min = 10.0;
  double speed_max = 38.0;

  // Deviation magnitude before tag inflation:
  //   slope * kappa + knee_jump * logistic((kappa - knee_kappa) / knee_width)
  double deviation_slope = 8.327;
  double knee_kappa = 0.006;
  double knee_jump = 0.25;
  double knee_width = 0.0004;
  double deviation_noise_sd = 0.02;
  double deviation_threshold = 0.25;

  // Disengagement probability:
  //   logistic((v - speed_knee) / speed_width) * (base + adverse_gain * logistic((kappa - knee_kappa) / knee_width))
  // with the adverse term present only when an adverse tag is drawn.
  double speed_knee = 27.136;
  double speed_width = 0.75;
  double hazard_base = 0.03;
  double hazard_adverse_gain = 0.95;

  std::vector<LevelRule> road_type = {{"highway", 0.40, 1.0, false},
                                      {"arterial", 0.30, 1.0, false},
                                      {"rural", 0.20, 1.0, false},
                                      {"ramp_merge", 0.10, 1.2, false}};
  std::vector<LevelRule> marking_condition = {{"good", 0.50, 1.0, false},
                                              {"faded", 0.25, 1.8, true},
                                              {"low_contrast", 0.18, 1.6, true},
                                              {"missing", 0.07, 2.0, true}};
  std::vector<LevelRule> lighting = {{"day", 0.60, 1.0, false},
                                     {"night", 0.20, 1.15, true},
                                     {"glare", 0.10, 1.2, true},
                                     {"dusk", 0.10, 1.05, false}};
  std::vector<LevelRule> weather = {{"clear", 0.70, 1.0, false},
                                    {"rain", 0.15, 1.25, true},
                                    {"snow", 0.07, 1.35, true},
                                    {"fog", 0.08, 1.2, true}};
  std::vector<LevelRule> surface = {{"good", 0.60, 1.0, false}, {"fair", 0.30, 1.0, false}, {"poor", 0.10, 1.1, false}};

  const std::vector<LevelRule>& rules(Feature f) const {
    switch (f) {
      case Feature::road_type: return road_type;
      case Feature::marking_condition: return marking_condition;
      case Feature::lighting: return lighting;
      case Feature::weather: return weather;
      case Feature::surface: return surface;
      default: break;
    }
    throw DomainError(std::string("feature '") + kFeatureNames[static_cast<std::size_t>(f)] + "' is not categorical");
  }

  FeatureSchema schema() const {
    FeatureSchema s;
    auto names = [](const std::vector<LevelRule>& r) {
      std::vector<std::string> v;
      for (const auto& l : r) v.push_back(l.name);
      return v;
    };
    s.road_type = names(road_type);
    s.marking_condition = names(marking_condition);
    s.lighting = names(lighting);
    s.weather = names(weather);
    s.surface = names(surface);
    return s;
  }

  void validate() const {
    if (version != kGeneratorConfigVersion)
      throw DomainError("generator config version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kGeneratorConfigVersion) + ")");
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string("generator config: ") + what + " must be positive");
    };
    auto non_negative = [](double v, const char* what) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw DomainError(std::string("generator config: ") + what + " must be non-negative");
    };
    positive(kappa_max, "kappa_max");
    positive(speed_mean, "speed_mean");
    non_negative(speed_sd, "speed_sd");
    if (!(speed_min > 0.0 && speed_min < speed_max)) throw DomainError("generator config: need 0 < speed_min < speed_max");
    non_negative(deviation_slope, "deviation_slope");
    non_negative(knee_kappa, "knee_kappa");
    non_negative(knee_jump, "knee_jump");
    positive(knee_width, "knee_width");
    non_negative(deviation_noise_sd, "deviation_noise_sd");
    positive(deviation_threshold, "deviation_threshold");
    positive(speed_knee, "speed_knee");
    positive(speed_width, "speed_width");
    non_negative(hazard_base, "hazard_base");
    non_negative(hazard_adverse_gain, "hazard_adverse_gain");
    if (hazard_base + hazard_adverse_gain > 1.0) throw DomainError("generator config: hazard_base + hazard_adverse_gain exceeds 1");
    for (Feature f : {Feature::road_type, Feature::marking_condition, Feature::lighting, Feature::weather,
                      Feature::surface}) {
      const auto& r = rules(f);
      const std::string name = kFeatureNames[static_cast<std::size_t>(f)];
      if (r.size() < 2 || r.size() > 6) throw DomainError("generator config: " + name + " must have 2..6 levels");
      double total = 0.0;
      for (const auto& l : r) {
        if (l.name.empty()) throw DomainError("generator config: " + name + " has an unnamed level");
        if (!(l.probability >= 0.0)) throw DomainError("generator config: " + name + " probabilities must be >= 0");
        if (!(l.multiplier > 0.0)) throw DomainError("generator config: " + name + " multipliers must be > 0");
        total += l.probability;
      }
      if (std::abs(total - 1.0) > 1e-9) throw DomainError("generator config: " + name + " probabilities must sum to 1");
    }
  }

  bool operator==(const GeneratorConfig&) const = default;
};

namespace detail {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline std::uint8_t draw_level(Rng& rng, const std::vector<LevelRule>& rules) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    acc += rules[i].probability;
    if (u < acc) return static_cast<std::uint8_t>(i);
  }
  return static_cast<std::uint8_t>(rules.size() - 1);
}

}  // namespace detail

/// Expected deviation magnitude for a feature vector, before noise [m].
inline double synthetic_deviation(const GeneratorConfig& cfg, const FeatureVector& fv) {
  double m = 1.0;
  for (Feature f : {Feature::road_type, Feature::marking_condition, Feature::lighting, Feature::weather,
                    Feature::surface})
    m *= cfg.rules(f)[static_cast<std::size_t>(fv.value(f))].multiplier;
  const double base =
      cfg.deviation_slope * fv.kappa + cfg.knee_jump * detail::logistic((fv.kappa - cfg.knee_kappa) / cfg.knee_width);
  return m * base;
}

inline bool has_adverse_tag(const GeneratorConfig& cfg, const FeatureVector& fv) {
  for (Feature f : {Feature::road_type, Feature::marking_condition, Feature::lighting, Feature::weather,
                    Feature::surface})
    if (cfg.rules(f)[static_cast<std::size_t>(fv.value(f))].adverse) return true;
  return false;
}

inline double disengagement_probability(const GeneratorConfig& cfg, const FeatureVector& fv) {
  double hazard = cfg.hazard_base;
  if (has_adverse_tag(cfg, fv))
    hazard += cfg.hazard_adverse_gain * detail::logistic((fv.kappa - cfg.knee_kappa) / cfg.knee_width);
  return detail::logistic((fv.speed - cfg.speed_knee) / cfg.speed_width) * hazard;
}

/// Draws n labeled examples. Every example consumes the same number of draws
/// in a fixed order, so a dataset is a pure function of (n, seed, config).
inline Dataset generate_synthetic(std::size_t n, std::uint64_t seed, const GeneratorConfig& cfg = {}) {
  if (n == 0) throw DomainError("generate_synthetic: n must be positive");
  cfg.validate();
  Rng rng(seed);
  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledExample ex;
    auto& fv = ex.features;
    fv.kappa = rng.uniform(0.0, cfg.kappa_max);
    fv.speed = std::clamp(rng.normal(cfg.speed_mean, cfg.speed_sd), cfg.speed_min, cfg.speed_max);
    fv.road_type = detail::draw_level(rng, cfg.road_type);
    fv.marking_condition = detail::draw_level(rng, cfg.marking_condition);
    fv.lighting = detail::draw_level(rng, cfg.lighting);
    fv.weather = detail::draw_level(rng, cfg.weather);
    fv.surface = detail::draw_level(rng, cfg.surface);
    const double deviation = synthetic_deviation(cfg, fv) + rng.normal(0.0, cfg.deviation_noise_sd);
    const bool disengaged = rng.bernoulli(disengagement_probability(cfg, fv));
    if (disengaged)
      ex.outcome = Outcome::disengagement;
    else if (std::abs(deviation) >= cfg.deviation_threshold)
      ex.outcome = Outcome::deviation;
    else
      ex.outcome = Outcome::normal;
    out.push_back(ex);
  }
  return out;
}

}  // namespace lka::readiness
