#pragma once

#include <stdexcept>

namespace optotrap {

// Rejected input: an invariant of the parameter set or a precondition failed.
struct InvalidParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed to converge or produced a degenerate system.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace optotrap
