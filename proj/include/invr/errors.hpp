#pragma once

#include <stdexcept>
#include <string>

namespace invr {

// Invalid user-supplied parameters (dimensions, ranges, unknown ids).
struct parameter_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical failures (non-convergence, NaN iterates, singular systems).
struct compute_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A gradient backend or analysis was requested for a solver that cannot
// provide it.
struct backend_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested quantity does not exist for this input (e.g. Bregman distance
// of a non-variational reconstruction).
struct not_applicable_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace invr
