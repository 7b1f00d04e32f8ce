#pragma once

#include <stdexcept>
#include <string>

namespace pldp {

// Root of all library errors. Everything thrown on purpose derives from this,
// so callers can catch one type at the CLI boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// ===== tensor / autodiff =====

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Shapes whose dimensions don't line up for an op (matmul inner dims, ...).
class DimensionError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

// Wrong rank for an op (e.g. backward on a non-scalar).
class RankError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

// l2_normalize / cosine on a (near-)zero vector.
class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

// Graph misuse: loss not reachable, op on detached tensors, ...
class GraphError : public Error {
 public:
  using Error::Error;
};

// ===== data / indexing =====

class IndexError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

// Image size not divisible by the jigsaw grid, bad grid, bad permutation.
class GridError : public Error {
 public:
  using Error::Error;
};

class PermutationError : public Error {
 public:
  using Error::Error;
};

// Sampling from an empty domain (e.g. a permutation of zero elements).
class EmptyDomainError : public Error {
 public:
  using Error::Error;
};

// File parsing (PPM, manifest, config). Carries a byte offset when known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg, long long byte_offset = -1)
      : Error(byte_offset >= 0 ? msg + " at byte " + std::to_string(byte_offset) : msg),
        offset_(byte_offset) {}
  long long byte_offset() const { return offset_; }

 private:
  long long offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ===== config / training =====

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

// k-means asked for more clusters than points.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Cluster assignment vector that is not one-hot.
class AssignmentError : public Error {
 public:
  using Error::Error;
};

// Non-finite gradient or other mid-run failure; message names the tensor.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace pldp
