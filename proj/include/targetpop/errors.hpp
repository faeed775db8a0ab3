#pragma once

#include <stdexcept>
#include <string>

namespace targetpop {

// User-facing input/configuration problems (bad schema, missing columns,
// invalid options). CLI maps these to exit code 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures (non-convergence, separation, rank deficiency,
// degenerate weights). CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace targetpop
