#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qclock {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or invariant violated by caller-supplied data.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A clock mode with E_n >= E was requested; such modes do not propagate.
class EvanescentMode : public Error {
 public:
  EvanescentMode(double mode_energy, double total_energy)
      : Error("evanescent clock mode: E_n = " + std::to_string(mode_energy) +
              " >= E = " + std::to_string(total_energy)),
        mode_energy_(mode_energy),
        total_energy_(total_energy) {}

  double mode_energy() const { return mode_energy_; }
  double total_energy() const { return total_energy_; }

 private:
  double mode_energy_;
  double total_energy_;
};

/// Numerov stability bound |2M(E-U)h^2/hbar^2| < 1 broken at `index`.
class StepSizeError : public Error {
 public:
  StepSizeError(std::size_t index, double value)
      : Error("numerov step too large at node " + std::to_string(index) +
              ": |f h^2| = " + std::to_string(value) + " >= 1"),
        index_(index) {}

  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Argument outside the domain of a function (e.g. log at zero).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Problem size above a hard storage cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Iterative algorithm failed to converge within its sweep budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace qclock
