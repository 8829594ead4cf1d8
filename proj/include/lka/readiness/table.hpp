// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Feature tables on disk. Categorical cells hold level names, not codes.
//   kappa_inv_m,speed_mps,road_type,marking_condition,lighting,weather,surface[,outcome]

#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "lka/csv.hpp"
#include "lka/readiness/features.hpp"

namespace lka::readiness {

inline const std::vector<std::string>& feature_columns() {
  static const std::vector<std::string> cols = {"kappa_inv_m", "speed_mps", "road_type", "marking_condition",
                                                "lighting",    "weather",   "surface"};
  return cols;
}

struct FeatureTable {
  std::vector<FeatureVector> rows;
  std::vector<Outcome> outcomes;  // empty when the file has no outcome column
};

inline FeatureTable parse_feature_table(std::istream& in, const FeatureSchema& schema, bool require_outcome) {
  const auto table = csv::Table::read(in);
  if (table.header().empty()) throw ParseError("feature file is empty");
  table.require(feature_columns());
  const bool with_outcome = table.has_column("outcome");
  if (require_outcome && !with_outcome) throw ParseError("feature file has no 'outcome' column");

  FeatureTable out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto row = table.row(i);
    FeatureVector fv;
    fv.kappa = std::abs(row.number_at("kappa_inv_m"));
    fv.speed = row.number_at("speed_mps");
    if (!(fv.speed >= 0.0)) throw ParseError("speed_mps must be non-negative", row.number);
    try {
      for (Feature f : {Feature::road_type, Feature::marking_condition, Feature::lighting, Feature::weather,
                        Feature::surface})
        fv.set(f, schema.code(f, row.text(kFeatureNames[static_cast<std::size_t>(f)])));
      if (with_outcome) out.outcomes.push_back(outcome_from_string(row.text("outcome")));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), row.number);
    }
    out.rows.push_back(fv);
  }
  if (out.rows.empty()) throw ParseError("feature file has no rows");
  return out;
}

inline Dataset to_dataset(const FeatureTable& t) {
  if (t.outcomes.size() != t.rows.size()) throw DomainError("feature table has no outcome labels");
  Dataset d;
  d.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) d.push_back({t.rows[i], t.outcomes[i]});
  return d;
}

inline void write_feature_row(std::ostream& out, const FeatureVector& fv, const FeatureSchema& schema) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g,%.6g", fv.kappa, fv.speed);
  out << buf;
  for (Feature f : {Feature::road_type, Feature::marking_condition, Feature::lighting, Feature::weather,
                    Feature::surface})
    out << ',' << schema.levels(f)[static_cast<std::size_t>(fv.value(f))];
}

inline void write_dataset_csv(std::ostream& out, const Dataset& data, const FeatureSchema& schema) {
  for (const auto& c : feature_columns()) out << c << ',';
  out << "outcome\n";
  for (const auto& ex : data) {
    write_feature_row(out, ex.features, schema);
    out << ',' << to_string(ex.outcome) << '\n';
  }
}

}  // namespace lka::readiness
