#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace cecmmr {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

/// Invalid configuration values (zero dimensions, out-of-range rates, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config_error"; }
};

/// Shape mismatch between matrices, traces and states.
class DimensionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "dimension_error"; }
};

/// Non-finite losses or gradients during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "training_error"; }
};

/// Problems reading or validating input data. Carries the file location when known.
class DataError : public Error {
 public:
  enum class Reason {
    kMissingFile,
    kNonNumeric,
    kMissingColumn,
    kMalformedLine,
    kEmpty,
    kZeroVariance,
    kInvalidArgument,
  };

  DataError(Reason reason, const std::string& message,
            std::optional<std::size_t> line = std::nullopt,
            std::optional<std::size_t> column = std::nullopt)
      : Error(format(message, line, column)), reason_(reason), line_(line), column_(column) {}

  const char* kind() const noexcept override { return "data_error"; }
  Reason reason() const noexcept { return reason_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  std::optional<std::size_t> column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& message, std::optional<std::size_t> line,
                            std::optional<std::size_t> column) {
    std::string out = message;
    if (line) out += " (line " + std::to_string(*line);
    if (line && column) out += ", column " + std::to_string(*column);
    if (!line && column) out += " (column " + std::to_string(*column);
    if (line || column) out += ")";
    return out;
  }

  Reason reason_;
  std::optional<std::size_t> line_;
  std::optional<std::size_t> column_;
};

}  // namespace cecmmr
