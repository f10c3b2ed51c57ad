#pragma once

#include <stdexcept>
#include <string>

namespace pomapf {

// Caller broke a precondition or an internal invariant.
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Tensor shapes incompatible with the requested primitive.
struct DimensionError : ContractError {
  explicit DimensionError(const std::string& what) : ContractError(what) {}
};

// Bad configuration value (out-of-range hyperparameter, even FOV, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file; message carries the offending line where possible.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Input parsed fine but violates a domain invariant; names the record.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Random instance generation exhausted its retry budget.
struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pomapf
