#pragma once

#include <stdexcept>
#include <string>

namespace voxstate {

// Base class for all library failures.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or argument values (bad shapes, out-of-range
// hyperparameters, empty inputs the caller should have filtered).
struct config_error : error {
  using error::error;
};

// Malformed file content: wrong magic, unsupported version, truncation,
// inconsistent headers. Messages name the offending file and byte offset
// where that is known.
struct format_error : error {
  using error::error;
};

// Numeric breakdown at runtime: iteration caps exceeded, degenerate
// statistics, zero-norm inputs to operations that require scale.
struct numeric_error : error {
  using error::error;
};

// Operation issued out of order, e.g. a backward pass with no cached
// forward activations to consume.
struct state_error : error {
  using error::error;
};

}  // namespace voxstate
