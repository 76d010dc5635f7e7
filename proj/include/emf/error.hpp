#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace emf {

/// Base class for errors caused by inputs, data or configuration.
/// The CLI maps these to exit code 1; anything else is an internal error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// A sequence is too short (or too long) for the requested operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Statistics are undefined, e.g. a constant training segment.
class DegenerateSeriesError : public Error {
 public:
  using Error::Error;
};

/// Least-squares design matrix is rank deficient.
class RankError : public Error {
 public:
  using Error::Error;
};

class InsufficientCalibrationError : public Error {
 public:
  InsufficientCalibrationError(const std::string& what, std::size_t required_m)
      : Error(what), required_m_(required_m) {}
  std::size_t required_m() const noexcept { return required_m_; }

 private:
  std::size_t required_m_;
};

class TrainingDivergenceError : public Error {
 public:
  TrainingDivergenceError(const std::string& what, int last_finite_epoch)
      : Error(what), last_finite_epoch_(last_finite_epoch) {}
  /// 1-based; 0 when no epoch completed with a finite loss.
  int last_finite_epoch() const noexcept { return last_finite_epoch_; }

 private:
  int last_finite_epoch_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ComparabilityError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// A module error re-raised by the end-to-end pipeline with the stage it came from.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// API misuse (e.g. backward before forward). Not an input error.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace emf
