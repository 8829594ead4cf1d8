// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// JSON documents exchanged by the command-line tool.

#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include "lka/design_rules.hpp"
#include "lka/deviation_model.hpp"
#include "lka/failure_diagnosis.hpp"
#include "lka/lateral_dynamics.hpp"
#include "lka/readiness/forest.hpp"
#include "lka/readiness/synthetic.hpp"
#include "lka/telemetry.hpp"

namespace lka::io {

using nlohmann::json;

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
}

namespace detail {

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": key '" + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Vehicle capability

inline json to_json(const VehicleCapability& c) {
  return {{"name", c.name},           {"k_a", c.k_a},         {"t_max", c.t_max},
          {"dt_dt_max", c.dt_dt_max}, {"delta_max", c.delta_max}, {"wheelbase", c.wheelbase}};
}

inline VehicleCapability capability_from_json(const json& j) {
  const std::string where = "capability";
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  VehicleCapability c;
  c.name = detail::get_or<std::string>(j, "name", c.name, where);
  c.k_a = detail::get<double>(j, "k_a", where);
  c.t_max = detail::get<double>(j, "t_max", where);
  c.dt_dt_max = detail::get<double>(j, "dt_dt_max", where);
  c.delta_max = detail::get_or(j, "delta_max", c.delta_max, where);
  c.wheelbase = detail::get_or(j, "wheelbase", c.wheelbase, where);
  try {
    validate(c);
  } catch (const DomainError& e) {
    throw ParseError(e.what());
  }
  return c;
}

inline VehicleCapability load_capability(const std::string& path) { return capability_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Analysis results

inline json to_json(const LinearFit& f) {
  return {{"slope_m2", f.slope}, {"intercept_m", f.intercept}, {"r_squared", f.r_squared}, {"n", f.n}};
}

inline json to_json(const AuditFinding& f) {
  return {{"rule", to_string(f.rule)},
          {"x_start_m", f.x_start},
          {"x_end_m", f.x_end},
          {"severity", to_string(f.severity)},
          {"required", f.required_value},
          {"actual", f.actual_value},
          {"unit", f.unit},
          {"message", f.message}};
}

inline json to_json(const AuditReport& r) {
  json findings = json::array();
  for (const auto& f : r.findings) findings.push_back(to_json(f));
  return {{"profile", r.profile_name},
          {"capability", r.capability_name},
          {"speed_mode", r.speed_mode},
          {"speed_used_mps", r.speed_used},
          {"violations", r.violations()},
          {"findings", std::move(findings)}};
}

inline json to_json(const Episode& e) {
  return {{"kind", to_string(e.kind)},
          {"t_start_s", e.t_start},
          {"t_end_s", e.t_end},
          {"peak_deviation_m", e.peak_deviation},
          {"critical", e.critical}};
}

inline json diagnosis_json(std::size_t episode_id, const FailureLabel& label) {
  json components = json::array();
  for (auto c : label.components) components.push_back(to_string(c));
  json evidence = json::array();
  for (const auto& e : label.evidence) evidence.push_back({{"signal", e.signal}, {"value", e.value}, {"rule", e.rule}});
  return {{"episode_id", episode_id},
          {"category", to_string(label.category)},
          {"components", std::move(components)},
          {"evidence", std::move(evidence)}};
}

inline json to_json(const FactorTally& t) {
  json singles = json::array();
  for (const auto& [name, count] : t.ranked_singles()) singles.push_back({{"factor", name}, {"count", count}});
  json combos = json::array();
  for (const auto& [set, count] : t.ranked_combos()) {
    json names = json::array();
    for (const auto& n : set) names.push_back(n);
    combos.push_back({{"factors", std::move(names)}, {"count", count}});
  }
  json categories = json::object();
  for (const auto& [name, count] : t.category_counts) categories[name] = count;
  return {{"categories", std::move(categories)}, {"singles", std::move(singles)}, {"combinations", std::move(combos)}};
}

/// factors,size,count; singles first, then combinations, each by count descending.
inline std::string tally_csv(const FactorTally& t) {
  std::ostringstream out;
  out << "factors,size,count\n";
  for (const auto& [name, count] : t.ranked_singles()) out << name << ",1," << count << '\n';
  for (const auto& [set, count] : t.ranked_combos()) out << join(set) << ',' << set.size() << ',' << count << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Readiness classifier

inline json to_json(const readiness::Metrics& m) {
  using namespace readiness;
  json per_class = json::object();
  for (std::size_t c = 0; c < kClassCount; ++c)
    per_class[to_string(static_cast<Outcome>(c))] = {{"precision", m.precision[c]}, {"recall", m.recall[c]}};
  json confusion = json::array();
  for (const auto& row : m.confusion) confusion.push_back(row);
  return {{"n", m.n}, {"accuracy", m.accuracy}, {"per_class", std::move(per_class)}, {"confusion", std::move(confusion)}};
}

/// Rows are true classes, columns predicted classes.
inline std::string confusion_csv(const readiness::Metrics& m) {
  using namespace readiness;
  std::ostringstream out;
  out << "true\\predicted";
  for (std::size_t c = 0; c < kClassCount; ++c) out << ',' << to_string(static_cast<Outcome>(c));
  out << '\n';
  for (std::size_t r = 0; r < kClassCount; ++r) {
    out << to_string(static_cast<Outcome>(r));
    for (std::size_t c = 0; c < kClassCount; ++c) out << ',' << m.confusion[r][c];
    out << '\n';
  }
  return out.str();
}

inline json to_json(const readiness::ImportanceReport& rep) {
  json scores = json::array();
  for (auto f : rep.ranking())
    scores.push_back({{"feature", readiness::kFeatureNames[static_cast<std::size_t>(f)]},
                      {"importance", rep.scores[static_cast<std::size_t>(f)]}});
  return scores;
}

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormat = "lka-readiness-forest";

inline json schema_json(const readiness::FeatureSchema& s) {
  return {{"road_type", s.road_type},
          {"marking_condition", s.marking_condition},
          {"lighting", s.lighting},
          {"weather", s.weather},
          {"surface", s.surface}};
}

inline readiness::FeatureSchema schema_from_json(const json& j) {
  const std::string where = "schema";
  readiness::FeatureSchema s;
  s.road_type = detail::get<std::vector<std::string>>(j, "road_type", where);
  s.marking_condition = detail::get<std::vector<std::string>>(j, "marking_condition", where);
  s.lighting = detail::get<std::vector<std::string>>(j, "lighting", where);
  s.weather = detail::get<std::vector<std::string>>(j, "weather", where);
  s.surface = detail::get<std::vector<std::string>>(j, "surface", where);
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what());
  }
  return s;
}

/// Each node is [feature, threshold, left_levels, left, right, n_normal,
/// n_deviation, n_disengagement]; feature -1 marks a leaf.
inline json to_json(const readiness::ReadinessModel& m) {
  using namespace readiness;
  json trees = json::array();
  for (const auto& tree : m.trees) {
    json nodes = json::array();
    for (const auto& n : tree.nodes)
      nodes.push_back(json::array({n.feature, n.threshold, n.left_levels, n.left, n.right, n.histogram[0],
                                   n.histogram[1], n.histogram[2]}));
    trees.push_back(std::move(nodes));
  }
  json features = json::array();
  for (auto name : kFeatureNames) features.push_back(name);
  json classes = json::array();
  for (std::size_t c = 0; c < kClassCount; ++c) classes.push_back(to_string(static_cast<Outcome>(c)));
  return {{"format", kModelFormat},
          {"version", kModelFormatVersion},
          {"features", std::move(features)},
          {"classes", std::move(classes)},
          {"schema", schema_json(m.schema)},
          {"params",
           {{"n_trees", m.params.n_trees},
            {"max_depth", m.params.max_depth},
            {"min_leaf", m.params.min_leaf},
            {"feature_subsample", m.params.resolved_subsample()},
            {"seed", m.params.seed}}},
          {"class_priors", m.class_priors},
          {"n_train", m.n_train},
          {"node_fields",
           {"feature", "threshold", "left_levels", "left", "right", "n_normal", "n_deviation", "n_disengagement"}},
          {"trees", std::move(trees)}};
}

inline readiness::ReadinessModel model_from_json(const json& j) {
  using namespace readiness;
  const std::string where = "model";
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  if (detail::get<std::string>(j, "format", where) != kModelFormat)
    throw ParseError(where + ": not a readiness model file");
  const int version = detail::get<int>(j, "version", where);
  if (version != kModelFormatVersion)
    throw ParseError(where + ": format version " + std::to_string(version) + " is not supported (expected " +
                     std::to_string(kModelFormatVersion) + ")");
  std::vector<std::string> expected(kFeatureNames.begin(), kFeatureNames.end());
  if (detail::get<std::vector<std::string>>(j, "features", where) != expected)
    throw ParseError(where + ": feature list does not match this build");

  ReadinessModel m;
  m.schema = schema_from_json(detail::get<json>(j, "schema", where));
  const json params = detail::get<json>(j, "params", where);
  m.params.n_trees = detail::get<std::size_t>(params, "n_trees", "model params");
  m.params.max_depth = detail::get<std::size_t>(params, "max_depth", "model params");
  m.params.min_leaf = detail::get<std::size_t>(params, "min_leaf", "model params");
  m.params.feature_subsample = detail::get<std::size_t>(params, "feature_subsample", "model params");
  m.params.seed = detail::get<std::uint64_t>(params, "seed", "model params");
  m.class_priors = detail::get<ClassProbabilities>(j, "class_priors", where);
  m.n_train = detail::get<std::size_t>(j, "n_train", where);

  const json trees = detail::get<json>(j, "trees", where);
  if (!trees.is_array() || trees.empty()) throw ParseError(where + ": no trees");
  for (const auto& jt : trees) {
    DecisionTree tree;
    if (!jt.is_array() || jt.empty()) throw ParseError(where + ": empty tree");
    for (const auto& jn : jt) {
      if (!jn.is_array() || jn.size() != 8) throw ParseError(where + ": malformed node record");
      TreeNode n;
      try {
        n.feature = jn[0].get<std::int32_t>();
        n.threshold = jn[1].get<double>();
        n.left_levels = jn[2].get<std::uint32_t>();
        n.left = jn[3].get<std::int32_t>();
        n.right = jn[4].get<std::int32_t>();
        for (std::size_t c = 0; c < kClassCount; ++c) n.histogram[c] = jn[5 + c].get<std::uint32_t>();
      } catch (const json::exception&) {
        throw ParseError(where + ": malformed node record");
      }
      tree.nodes.push_back(n);
    }
    const auto size = static_cast<std::int32_t>(tree.nodes.size());
    for (std::int32_t i = 0; i < size; ++i) {
      const auto& n = tree.nodes[static_cast<std::size_t>(i)];
      if (n.feature >= static_cast<std::int32_t>(kFeatureCount)) throw ParseError(where + ": node feature out of range");
      if (n.count() == 0) throw ParseError(where + ": node with an empty histogram");
      if (!n.is_leaf() && (n.left <= i || n.right <= i || n.left >= size || n.right >= size))
        throw ParseError(where + ": internal node child index out of range");
    }
    m.trees.push_back(std::move(tree));
  }
  if (m.trees.size() != m.params.n_trees) throw ParseError(where + ": tree count does not match n_trees");
  return m;
}

// ---------------------------------------------------------------------------
// Generator config

inline json rules_json(const std::vector<readiness::LevelRule>& rules) {
  json out = json::array();
  for (const auto& r : rules)
    out.push_back({{"level", r.name}, {"probability", r.probability}, {"multiplier", r.multiplier}, {"adverse", r.adverse}});
  return out;
}

inline json to_json(const readiness::GeneratorConfig& c) {
  return {{"version", c.version},
          {"kappa_max", c.kappa_max},
          {"speed", {{"mean", c.speed_mean}, {"sd", c.speed_sd}, {"min", c.speed_min}, {"max", c.speed_max}}},
          {"deviation",
           {{"slope", c.deviation_slope},
            {"knee_kappa", c.knee_kappa},
            {"knee_jump", c.knee_jump},
            {"knee_width", c.knee_width},
            {"noise_sd", c.deviation_noise_sd},
            {"threshold", c.deviation_threshold}}},
          {"disengagement",
           {{"speed_knee", c.speed_knee},
            {"speed_width", c.speed_width},
            {"hazard_base", c.hazard_base},
            {"hazard_adverse_gain", c.hazard_adverse_gain}}},
          {"levels",
           {{"road_type", rules_json(c.road_type)},
            {"marking_condition", rules_json(c.marking_condition)},
            {"lighting", rules_json(c.lighting)},
            {"weather", rules_json(c.weather)},
            {"surface", rules_json(c.surface)}}}};
}

/// Missing keys keep their defaults; the version key is required.
inline readiness::GeneratorConfig generator_config_from_json(const json& j) {
  using readiness::GeneratorConfig;
  const std::string where = "generator config";
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  GeneratorConfig c;
  c.version = detail::get<int>(j, "version", where);
  c.kappa_max = detail::get_or(j, "kappa_max", c.kappa_max, where);
  if (j.contains("speed")) {
    const auto& s = j.at("speed");
    c.speed_mean = detail::get_or(s, "mean", c.speed_mean, where);
    c.speed_sd = detail::get_or(s, "sd", c.speed_sd, where);
    c.speed_min = detail::get_or(s, "min", c.speed_min, where);
    c.speed_max = detail::get_or(s, "max", c.speed_max, where);
  }
  if (j.contains("deviation")) {
    const auto& d = j.at("deviation");
    c.deviation_slope = detail::get_or(d, "slope", c.deviation_slope, where);
    c.knee_kappa = detail::get_or(d, "knee_kappa", c.knee_kappa, where);
    c.knee_jump = detail::get_or(d, "knee_jump", c.knee_jump, where);
    c.knee_width = detail::get_or(d, "knee_width", c.knee_width, where);
    c.deviation_noise_sd = detail::get_or(d, "noise_sd", c.deviation_noise_sd, where);
    c.deviation_threshold = detail::get_or(d, "threshold", c.deviation_threshold, where);
  }
  if (j.contains("disengagement")) {
    const auto& d = j.at("disengagement");
    c.speed_knee = detail::get_or(d, "speed_knee", c.speed_knee, where);
    c.speed_width = detail::get_or(d, "speed_width", c.speed_width, where);
    c.hazard_base = detail::get_or(d, "hazard_base", c.hazard_base, where);
    c.hazard_adverse_gain = detail::get_or(d, "hazard_adverse_gain", c.hazard_adverse_gain, where);
  }
  if (j.contains("levels")) {
    const auto& lv = j.at("levels");
    auto read_rules = [&](const char* key, std::vector<readiness::LevelRule>& out) {
      if (!lv.contains(key)) return;
      const auto& arr = lv.at(key);
      if (!arr.is_array()) throw ParseError(where + ": levels." + key + " must be an array");
      out.clear();
      for (const auto& r : arr)
        out.push_back({detail::get<std::string>(r, "level", where), detail::get<double>(r, "probability", where),
                       detail::get_or(r, "multiplier", 1.0, where), detail::get_or(r, "adverse", false, where)});
    };
    read_rules("road_type", c.road_type);
    read_rules("marking_condition", c.marking_condition);
    read_rules("lighting", c.lighting);
    read_rules("weather", c.weather);
    read_rules("surface", c.surface);
  }
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what());
  }
  return c;
}

}  // namespace lka::io
