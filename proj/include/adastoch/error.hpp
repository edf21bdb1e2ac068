#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adastoch {

// Parameter outside its documented domain (gamma not in (0,1), batch = 0, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Components that cannot be combined, e.g. a STORM method driven by step-search oracles.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Strongly convex stopping rule requested on a problem without a known minimum.
class MissingGroundTruth : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A coupling step found p' < p, i.e. the trace violates the success-probability assumption.
class CouplingInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-monotone cost model handed to a complexity bound.
class AssumptionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by experiment commands when a computed quantity contradicts a proven bound.
class TheoryViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidParameter(message);
}

}  // namespace detail
}  // namespace adastoch
