#pragma once

#include <stdexcept>
#include <string>

namespace genpath {

// Bad user input: malformed files, inconsistent dimensions, unknown options.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown (non-positive Cholesky pivot, singular system where a
// definite one was required, ...). Path runs catch this and return a partial
// result.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// An internal precondition that callers are supposed to guarantee was broken
// (e.g. a right-hand side that must lie in the column space does not). This
// signals a bug in the caller, not bad data.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// Query outside the computed range (e.g. lambda below the computed path).
class RangeError : public std::runtime_error {
 public:
  explicit RangeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by the full-rank factorization when the input fails the rank test;
// callers fall back to the rank-revealing factorization.
class RankDeficientError : public std::runtime_error {
 public:
  explicit RankDeficientError(const std::string& msg)
      : std::runtime_error(msg) {}
};

}  // namespace genpath
