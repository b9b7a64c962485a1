#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace difftree {

// Base error carrying a machine-readable code ("config.lambda", "data.missing_cell", ...)
// next to the human-readable message. The CLI maps these onto error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Invalid configuration values (lambda <= 0, depth out of range, bad rates).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed call arguments: bad node ids, shape mismatches, overlapping columns.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  NumericError(const std::string& message) : Error("numeric", message) {}
};

// Broken internal invariants (unsorted scalar-subproblem input, corrupt state).
class InternalError : public Error {
 public:
  InternalError(const std::string& message) : Error("internal", message) {}
};

// API misuse, e.g. backward on a solution without group bookkeeping.
class UsageError : public Error {
 public:
  UsageError(const std::string& message) : Error("usage", message) {}
};

// CSV ingestion failure; carries the offending location.
class IngestionError : public Error {
 public:
  IngestionError(const std::string& code, const std::string& message, int row,
                 std::string column)
      : Error(code, message), row_(row), column_(std::move(column)) {}
  int row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  int row_;
  std::string column_;
};

// Divergence during training; carries epoch/batch of first non-finite loss.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& message, int epoch, int batch)
      : Error("training.divergence", message), epoch_(epoch), batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

// A reference oracle exhausted its budget without converging. Tests fail loudly
// on this instead of comparing against a silent wrong baseline.
class OracleFailure : public Error {
 public:
  OracleFailure(const std::string& message) : Error("oracle.failure", message) {}
};

}  // namespace difftree
