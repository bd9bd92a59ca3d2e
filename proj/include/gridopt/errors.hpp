#pragma once

#include <stdexcept>
#include <string>

namespace gridopt {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (bad row, bad number, missing column).
struct ParseError : Error {
  using Error::Error;
};

/// Structurally invalid data (duplicate ids, dangling endpoints, bad bounds).
struct ValidationError : Error {
  using Error::Error;
};

/// Graph-level inconsistency (disconnected bus, non-radial configuration).
struct TopologyError : Error {
  using Error::Error;
};

/// Invalid arguments to an operation.
struct InputError : Error {
  using Error::Error;
};

/// Invalid configuration object (missing switch state, empty cell list, ...).
struct ConfigError : Error {
  using Error::Error;
};

/// Problem size above a hard guard (enumeration or grid blowup).
struct CapacityError : Error {
  using Error::Error;
};

/// Ill-posed numerical problem (dimension mismatch, rank deficiency).
struct NumericalError : Error {
  using Error::Error;
};

/// Iterative solver produced a non-finite iterate.
struct DivergenceError : Error {
  int iteration = -1;
  DivergenceError(const std::string& msg, int iter)
      : Error(msg + " (iteration " + std::to_string(iter) + ")"), iteration(iter) {}
};

/// No feasible point (empty interval, all configurations rejected).
struct InfeasibleError : Error {
  using Error::Error;
};

}  // namespace gridopt
