#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace morphogen {

// Dense scalar-templated aliases. Column-major throughout; a sequence of
// feature vectors is stored one column per sample so timestep updates are
// plain GEMMs.
template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, 1>;

using Matd = MatX<double>;
using Vecd = VecX<double>;
using Matf = MatX<float>;
using Vecf = VecX<float>;

using IdMat = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input text; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad byte sequence, out-of-vocabulary character, or invalid id.
class EncodingError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape mismatch between arguments.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Training aborted (non-finite loss, empty sample set, ...).
class TrainError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointManifestError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace morphogen
