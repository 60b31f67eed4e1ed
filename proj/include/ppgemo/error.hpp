#pragma once

#include <stdexcept>
#include <string>

namespace ppgemo {

// Error categories used across the pipeline. The CLI maps every one of these
// to exit status 1; only argument parsing failures produce status 2.
enum class ErrorKind { config, data, shape, state, metric_undefined, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};

struct StateError : Error {
  explicit StateError(const std::string& what) : Error(ErrorKind::state, what) {}
};

struct MetricUndefinedError : Error {
  explicit MetricUndefinedError(const std::string& what)
      : Error(ErrorKind::metric_undefined, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace ppgemo
