// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lka {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or row. `row()` is the 1-based data row (0 when the
/// error is not tied to a row).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, std::size_t row = 0)
      : Error(row ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Argument outside the domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace lka
