#ifndef FRACLAP_ERRORS_HPP
#define FRACLAP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fraclap {

/// Argument outside the mathematical domain of a function (poles, bad orders).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed grids, mismatched domains, bad geometry parameters.
class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The input violates a side condition of the operator, e.g. (u,1) = 0.
class SideConditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A linear solve did not reach its residual target.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Unreadable or inconsistent report/grid/config files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fraclap

#endif  // FRACLAP_ERRORS_HPP
