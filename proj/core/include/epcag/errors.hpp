#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace epcag {

/// Base class for every failure raised by the library. `module()` names the
/// subsystem that raised it so front-ends can tag diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// A time lies outside the finite index window of a schedule.
class WindowError : public Error {
 public:
  WindowError(const std::string& what, double lo, double hi)
      : Error("schedule", what), lo_(lo), hi_(hi) {}
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_, hi_;
};

/// Input that violates a documented invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string module, const std::string& what, long index = -1)
      : Error(std::move(module), what), index_(index) {}
  /// First offending index, or -1 when not applicable.
  long index() const noexcept { return index_; }

 private:
  long index_;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// The state became non-finite during integration.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double last_finite_time)
      : Error("solver", what), last_time_(last_finite_time) {}
  double last_finite_time() const noexcept { return last_time_; }

 private:
  double last_time_;
};

/// The anchor fixed-point iteration did not converge.
class NonContractionError : public Error {
 public:
  NonContractionError(const std::string& what, std::vector<double> ratios,
                      long interval)
      : Error("solver", what), ratios_(std::move(ratios)), interval_(interval) {}
  const std::vector<double>& ratios() const noexcept { return ratios_; }
  long interval() const noexcept { return interval_; }

 private:
  std::vector<double> ratios_;
  long interval_;
};

class PositiveSpectrumError : public Error {
 public:
  explicit PositiveSpectrumError(const std::string& what) : Error("analysis", what) {}
};

class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, double cond)
      : Error("analysis", what), cond_(cond) {}
  double condition_number() const noexcept { return cond_; }

 private:
  double cond_;
};

/// A smallness hypothesis required by a construction does not hold.
class SmallnessError : public Error {
 public:
  using Error::Error;
};

/// Picard iteration on an integral manifold failed to converge.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> deltas)
      : Error("manifolds", what), deltas_(std::move(deltas)) {}
  const std::vector<double>& deltas() const noexcept { return deltas_; }

 private:
  std::vector<double> deltas_;
};

/// A cached manifold lookup fell outside the precomputed coordinate box.
class BoxExceededError : public Error {
 public:
  explicit BoxExceededError(const std::string& what) : Error("manifolds", what) {}
};

class ContractionFailureError : public Error {
 public:
  explicit ContractionFailureError(const std::string& what)
      : Error("reduction", what) {}
};

class DegenerateDimensionError : public Error {
 public:
  explicit DegenerateDimensionError(const std::string& what)
      : Error("reduction", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("harness", what) {}
};

}  // namespace epcag
