#pragma once

#include <stdexcept>
#include <string>

namespace rjpdmp {

/// A precondition of an operation was not met by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid user-supplied parameter or configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite gradients, failed factorizations and similar numerical failures.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The evaluated event rate exceeded its thinning bound. Always a bug in a bound.
class ThinningBoundViolation : public NumericalError {
 public:
  ThinningBoundViolation(const std::string& what, double rate, double bound)
      : NumericalError(what), rate_(rate), bound_(bound) {}
  double rate() const noexcept { return rate_; }
  double bound() const noexcept { return bound_; }

 private:
  double rate_;
  double bound_;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace rjpdmp
