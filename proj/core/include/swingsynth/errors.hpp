#pragma once

#include <stdexcept>

namespace swingsynth {

/// Bad parameters, malformed files or violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a trustworthy result
/// (ill-conditioned solve, divergence, non-convergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace swingsynth
