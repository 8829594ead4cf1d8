// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Minimal comma-separated reader shared by the geometry, telemetry and
// feature loaders. No quoting: none of the schemas carry embedded commas.

#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lka/error.hpp"

namespace lka::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// One data row, addressable by header name.
struct Row {
  std::size_t number = 0;  // 1-based data row
  const std::unordered_map<std::string, std::size_t>* columns = nullptr;
  std::vector<std::string> cells;

  bool has(const std::string& name) const { return columns->count(name) != 0; }

  const std::string& text(const std::string& name) const {
    auto it = columns->find(name);
    if (it == columns->end()) throw ParseError("missing column '" + name + "'", number);
    return cells[it->second];
  }

  double number_at(const std::string& name) const {
    const std::string& s = text(name);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      // from_chars rejects "nan"/"inf" spellings on some libstdc++ builds; fall back.
      try {
        std::size_t used = 0;
        v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw ParseError("column '" + name + "': not a number: '" + s + "'", number);
      }
    }
    if (!std::isfinite(v)) throw ParseError("column '" + name + "': non-finite value", number);
    return v;
  }

  long integer_at(const std::string& name) const {
    const std::string& s = text(name);
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ParseError("column '" + name + "': not an integer: '" + s + "'", number);
    return v;
  }
};

/// Header-indexed table. Blank lines and lines starting with '#' are skipped.
class Table {
 public:
  static Table read(std::istream& in) {
    Table t;
    std::string line;
    bool have_header = false;
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
      std::string_view view = trim(line);
      if (view.empty() || view.front() == '#') continue;
      if (!have_header) {
        t.header_ = split(view);
        for (std::size_t i = 0; i < t.header_.size(); ++i) t.columns_[t.header_[i]] = i;
        have_header = true;
        continue;
      }
      ++data_row;
      auto cells = split(view);
      if (cells.size() != t.header_.size())
        throw ParseError("expected " + std::to_string(t.header_.size()) + " fields, got " +
                             std::to_string(cells.size()),
                         data_row);
      t.rows_.push_back(std::move(cells));
    }
    return t;
  }

  static Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read(in);
  }

  const std::vector<std::string>& header() const { return header_; }
  bool has_column(const std::string& name) const { return columns_.count(name) != 0; }
  std::size_t size() const { return rows_.size(); }

  Row row(std::size_t i) const { return Row{i + 1, &columns_, rows_[i]}; }

  void require(const std::vector<std::string>& names) const {
    for (const auto& n : names)
      if (!has_column(n)) throw ParseError("header is missing required column '" + n + "'");
  }

 private:
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace lka::csv
