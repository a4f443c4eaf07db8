#pragma once

#include <stdexcept>
#include <string>

namespace endo {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid model, smoother or experiment configuration. `line()` is the
/// 1-based source line when the error came from a config file, else 0.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg, int line = 0)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

class PreconditionError : public Error {
public:
  using Error::Error;
};

/// Local design matrix without full rank.
class SingularFitError : public Error {
public:
  SingularFitError(const std::string& msg, double effective_sample_size, double density)
    : Error(msg), ess_(effective_sample_size), density_(density) {}
  double effective_sample_size() const noexcept { return ess_; }
  double density() const noexcept { return density_; }

private:
  double ess_;
  double density_;
};

/// Evaluation outside the estimated support. `measure()` is the density
/// estimate at the point, or the violating mass for averaged estimators.
class SupportError : public Error {
public:
  SupportError(const std::string& msg, double measure) : Error(msg), measure_(measure) {}
  double measure() const noexcept { return measure_; }

private:
  double measure_;
};

/// One treatment arm has no local mass at the evaluation point.
class OverlapError : public SupportError {
public:
  using SupportError::SupportError;
};

/// Kernel weights sum to zero.
class NoSupportError : public Error {
public:
  using Error::Error;
};

class DegenerateColumnError : public Error {
public:
  using Error::Error;
};

class NearZeroDenominatorError : public Error {
public:
  NearZeroDenominatorError(const std::string& msg, double denominator)
    : Error(msg), denominator_(denominator) {}
  double denominator() const noexcept { return denominator_; }

private:
  double denominator_;
};

/// Too many bootstrap replicates failed.
class InstabilityError : public Error {
public:
  using Error::Error;
};

class UnsupportedFamilyError : public Error {
public:
  using Error::Error;
};

class WrongKindError : public Error {
public:
  using Error::Error;
};

class OracleInfeasibleError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace endo
