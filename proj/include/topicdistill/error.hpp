// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace topicdistill {

/// Base for every error the library throws. The category drives CLI exit
/// codes: data problems exit with 2, numeric failures with 3.
class Error : public std::runtime_error {
 public:
  enum class Category { kData, kNumeric };

  Error(Category category, std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), category_(category), kind_(std::move(kind)) {}

  Category category() const noexcept { return category_; }
  /// Short machine-readable name, e.g. "ParseError" or "DomainError".
  const std::string& kind() const noexcept { return kind_; }

 private:
  Category category_;
  std::string kind_;
};

class DataError : public Error {
 public:
  DataError(std::string kind, const std::string& what)
      : Error(Category::kData, std::move(kind), what) {}
};

class NumericError : public Error {
 public:
  NumericError(std::string kind, const std::string& what)
      : Error(Category::kNumeric, std::move(kind), what) {}
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError("ParseError", source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline DataError dimension_mismatch(const std::string& what) {
  return DataError("DimensionMismatch", what);
}

inline DataError index_out_of_range(const std::string& what) {
  return DataError("IndexOutOfRange", what);
}

inline NumericError domain_error(const std::string& what) {
  return NumericError("DomainError", what);
}

}  // namespace topicdistill
