#pragma once

#include <stdexcept>
#include <string>

namespace rdsat {

// Error taxonomy mirrored by the CLI exit codes:
//   parse_error -> 2, budget_error -> 3, precondition_error -> 4.
// Anything else (numeric_error included) is an internal failure.

struct parse_error : std::runtime_error {
  explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

struct budget_error : std::runtime_error {
  explicit budget_error(const std::string& what) : std::runtime_error(what) {}
};

struct precondition_error : std::runtime_error {
  explicit precondition_error(const std::string& what) : std::runtime_error(what) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rdsat
