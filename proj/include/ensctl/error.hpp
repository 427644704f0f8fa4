#pragma once

#include <stdexcept>
#include <string>

namespace ensctl {

enum class ErrorCode {
  invalid_dimension,
  shape,
  non_closed_basis,
  numeric,
  cut_locus,
  grid,
  spec,
  root_data,
  cover_incomplete,
  degree_too_high,
  degree_insufficient,
  compile_depth,
  uncontrollable,
  invariant_violation,
  parse,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_dimension: return "invalid-dimension";
    case ErrorCode::shape: return "shape";
    case ErrorCode::non_closed_basis: return "non-closed-basis";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::cut_locus: return "cut-locus";
    case ErrorCode::grid: return "grid";
    case ErrorCode::spec: return "spec";
    case ErrorCode::root_data: return "root-data";
    case ErrorCode::cover_incomplete: return "cover-incomplete";
    case ErrorCode::degree_too_high: return "degree-too-high";
    case ErrorCode::degree_insufficient: return "degree-insufficient";
    case ErrorCode::compile_depth: return "compile-depth";
    case ErrorCode::uncontrollable: return "uncontrollable";
    case ErrorCode::invariant_violation: return "invariant-violation";
    case ErrorCode::parse: return "parse";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ensctl
