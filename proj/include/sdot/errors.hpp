#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace sdot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong sizes, non-finite entries, violated invariants.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(what) {}
};

/// A Laguerre cell carries too little mass for derivative information.
class ConditioningError : public Error {
 public:
  explicit ConditioningError(const std::string& what) : Error(what) {}
};

/// Sum of lower domain endpoints exceeds one, or upper endpoints fall short.
class InfeasibleFee : public Error {
 public:
  explicit InfeasibleFee(const std::string& what) : Error(what) {}
};

/// The multiplier root could not be bracketed.
class BracketError : public Error {
 public:
  explicit BracketError(const std::string& what) : Error(what) {}
};

/// Second derivative of the conjugate is not available at the requested point.
class HessianUnavailable : public Error {
 public:
  explicit HessianUnavailable(const std::string& what) : Error(what) {}
};

/// The parameter shuffle could not place a cell mass in its target window.
class ShuffleError : public Error {
 public:
  explicit ShuffleError(const std::string& what) : Error(what) {}
};

/// A configuration file or option is malformed; field() names the culprit.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string field, const std::string& what)
      : InvalidArgument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace sdot
