#pragma once

#include <stdexcept>
#include <string>

namespace vslctl {

/// Argument outside the domain of an operation (negative density, l <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A fundamental diagram or set point does not satisfy the structural assumptions
/// the feedback laws rely on.
class AssumptionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gain calibration failed one of the sufficient conditions in strict mode.
class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-point or time-stepping iteration did not converge.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The closed-loop state left the admissible state space.
class StateEscapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vslctl
