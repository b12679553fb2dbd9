#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icarec {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf tried to enter a computation graph.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// A mini-batch too degenerate for a statistic (zero variance, zero norm,
/// single-class contrastive batch).
class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration, spec, or table contents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file. Carries the byte offset at which parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

/// Training hit a non-finite loss. `last_checkpoint` is empty when no
/// checkpoint had been written yet.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::string last_checkpoint)
      : Error(what), last_checkpoint_(std::move(last_checkpoint)) {}

  const std::string& last_checkpoint() const noexcept { return last_checkpoint_; }

 private:
  std::string last_checkpoint_;
};

}  // namespace icarec
