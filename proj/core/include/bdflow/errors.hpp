#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bdflow {

/// Invalid experiment, model, sampler, or dynamics parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A non-finite value appeared while evaluating a particle quantity.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (particle " + std::to_string(index) + ")"), index_(index) {}
  explicit NumericError(const std::string& what)
      : std::runtime_error(what), index_(static_cast<std::size_t>(-1)) {}

  /// Offending particle index, or SIZE_MAX when not tied to a particle.
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// The population cannot be restored (no particle left to duplicate).
class ExtinctionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An explicit scheme left its stability region (CFL, diverging fixed point).
class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation requested on a model that cannot provide it (e.g. exact F on a batch model).
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A least-squares fit could not be formed from the supplied records.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bdflow
