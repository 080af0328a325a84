#pragma once

#include <stdexcept>
#include <string>

namespace lfo {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// exit codes: ConfigError=2, DependencyError=3, NumericError=4, others=1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DependencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or truncated artifact files (bad magic, version, payload).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Data-dependent failures: missing classes, sparse labels, degenerate sets.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lfo
