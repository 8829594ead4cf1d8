// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lka/error.hpp"

namespace lka::readiness {

enum class Outcome : std::uint8_t { normal = 0, deviation = 1, disengagement = 2 };
inline constexpr std::size_t kClassCount = 3;

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::normal: return "normal";
    case Outcome::deviation: return "deviation";
    case Outcome::disengagement: return "disengagement";
  }
  return "?";
}

inline Outcome outcome_from_string(std::string_view s) {
  if (s == "normal") return Outcome::normal;
  if (s == "deviation") return Outcome::deviation;
  if (s == "disengagement") return Outcome::disengagement;
  throw ParseError("unknown outcome class '" + std::string(s) + "'");
}

/// Feature columns, in model order.
enum class Feature : std::uint8_t { kappa, speed, road_type, marking_condition, lighting, weather, surface };
inline constexpr std::size_t kFeatureCount = 7;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "kappa", "speed", "road_type", "marking_condition", "lighting", "weather", "surface"};

inline std::optional<Feature> feature_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    if (name == kFeatureNames[i]) return static_cast<Feature>(i);
  return std::nullopt;
}

inline bool is_categorical(Feature f) { return f != Feature::kappa && f != Feature::speed; }

/// Level names of the categorical features. These enumerations are defined
/// by this project; field datasets use their own vocabularies.
struct FeatureSchema {
  std::vector<std::string> road_type = {"highway", "arterial", "rural", "ramp_merge"};
  std::vector<std::string> marking_condition = {"good", "faded", "low_contrast", "missing"};
  std::vector<std::string> lighting = {"day", "night", "glare", "dusk"};
  std::vector<std::string> weather = {"clear", "rain", "snow", "fog"};
  std::vector<std::string> surface = {"good", "fair", "poor"};

  const std::vector<std::string>& levels(Feature f) const {
    switch (f) {
      case Feature::road_type: return road_type;
      case Feature::marking_condition: return marking_condition;
      case Feature::lighting: return lighting;
      case Feature::weather: return weather;
      case Feature::surface: return surface;
      default: break;
    }
    throw DomainError(std::string("feature '") + kFeatureNames[static_cast<std::size_t>(f)] +
                      "' is not categorical");
  }

  std::size_t level_count(Feature f) const { return is_categorical(f) ? levels(f).size() : 0; }

  std::uint8_t code(Feature f, std::string_view name) const {
    const auto& lv = levels(f);
    for (std::size_t i = 0; i < lv.size(); ++i)
      if (lv[i] == name) return static_cast<std::uint8_t>(i);
    throw ParseError("unknown " + std::string(kFeatureNames[static_cast<std::size_t>(f)]) + " level '" +
                     std::string(name) + "'");
  }

  void validate() const {
    for (Feature f : {Feature::road_type, Feature::marking_condition, Feature::lighting, Feature::weather,
                      Feature::surface}) {
      const auto n = levels(f).size();
      if (n < 2 || n > 6)
        throw DomainError(std::string("feature '") + kFeatureNames[static_cast<std::size_t>(f)] +
                          "' must have 2..6 levels");
    }
  }

  bool operator==(const FeatureSchema&) const = default;
};

struct FeatureVector {
  double kappa = 0.0;  // |curvature| [1/m]
  double speed = 0.0;  // [m/s]
  std::uint8_t road_type = 0;
  std::uint8_t marking_condition = 0;
  std::uint8_t lighting = 0;
  std::uint8_t weather = 0;
  std::uint8_t surface = 0;

  double value(Feature f) const {
    switch (f) {
      case Feature::kappa: return kappa;
      case Feature::speed: return speed;
      case Feature::road_type: return road_type;
      case Feature::marking_condition: return marking_condition;
      case Feature::lighting: return lighting;
      case Feature::weather: return weather;
      case Feature::surface: return surface;
    }
    return 0.0;
  }

  void set(Feature f, double v) {
    switch (f) {
      case Feature::kappa: kappa = v; break;
      case Feature::speed: speed = v; break;
      case Feature::road_type: road_type = static_cast<std::uint8_t>(v); break;
      case Feature::marking_condition: marking_condition = static_cast<std::uint8_t>(v); break;
      case Feature::lighting: lighting = static_cast<std::uint8_t>(v); break;
      case Feature::weather: weather = static_cast<std::uint8_t>(v); break;
      case Feature::surface: surface = static_cast<std::uint8_t>(v); break;
    }
  }

  bool operator==(const FeatureVector&) const = default;
};

inline void validate(const FeatureVector& fv, const FeatureSchema& schema) {
  for (Feature f : {Feature::road_type, Feature::marking_condition, Feature::lighting, Feature::weather,
                    Feature::surface})
    if (fv.value(f) >= static_cast<double>(schema.level_count(f)))
      throw DomainError(std::string("feature '") + kFeatureNames[static_cast<std::size_t>(f)] +
                        "' code out of range");
}

struct LabeledExample {
  FeatureVector features;
  Outcome outcome = Outcome::normal;
  bool operator==(const LabeledExample&) const = default;
};

using Dataset = std::vector<LabeledExample>;

}  // namespace lka::readiness
