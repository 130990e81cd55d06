#pragma once

#include <stdexcept>
#include <string>

namespace rwnoise {

/// Invalid model configuration (non-SPD covariance, non-positive beta, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Violated operation precondition (too few samples, bad seeds, image too small).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear solve failed: iteration cap reached or matrix not SPD.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, long iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  long iterations() const { return iterations_; }

 private:
  double residual_;
  long iterations_;
};

/// Every quadrature node had zero density: the parameter box misses the posterior mass.
class QuadratureDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rwnoise
