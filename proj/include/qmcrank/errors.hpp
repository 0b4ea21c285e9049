#pragma once

#include <stdexcept>
#include <string>

namespace qmcrank {

// Requested dimension exceeds the bundled Sobol direction-number table.
struct unsupported_dimension : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Enumeration or oracle request beyond the factorial-size guard.
struct size_limit_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// IPS weight or propensity at or below zero; carries the offending record.
struct positivity_violation : std::runtime_error {
  positivity_violation(const std::string& what, std::size_t record)
      : std::runtime_error(what + " (record " + std::to_string(record) + ")"),
        record_index(record) {}
  std::size_t record_index;
};

// Malformed input data; carries the 1-based line number.
struct parse_error : std::runtime_error {
  parse_error(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_number(line) {}
  std::size_t line_number;
};

struct empty_dataset_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qmcrank
