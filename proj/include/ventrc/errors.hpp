#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

namespace ventrc {

/// Invalid parameters, file contents or filter bookkeeping (e.g. shift budget).
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Rational evaluation hit a (near) root of the denominator.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, double frequency_hz)
      : std::runtime_error(what), frequency_hz_(frequency_hz) {}
  double frequency_hz() const { return frequency_hz_; }

 private:
  double frequency_hz_;
};

/// Numerical failure inside an estimator or solver.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-fatal diagnostics. Operations that can warn accept a sink; the
/// default prints to stderr.
using WarningSink = std::function<void(const std::string&)>;

inline WarningSink stderr_warnings() {
  return [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
}

inline WarningSink ignore_warnings() {
  return [](const std::string&) {};
}

}  // namespace ventrc
