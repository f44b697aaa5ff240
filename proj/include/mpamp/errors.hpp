#pragma once

#include <stdexcept>
#include <string>

namespace mpamp {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or configuration (exit code 1).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The optimization problem has no solution on the given search space (exit code 2).
class Infeasible : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed to reach its accuracy target (exit code 3).
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double achieved = 0.0)
      : Error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

}  // namespace mpamp
