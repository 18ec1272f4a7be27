#pragma once

#include <stdexcept>
#include <string>

namespace cdil {

/// Invalid experiment or partition parameters (k, fold counts, label sets).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violation of the session/trial protocol, e.g. an empty training split.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Feature or weight dimension mismatch.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or a linear solve whose residual exceeds tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown class name or index.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed input file. The message always carries file, line and field.
class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& file, std::size_t line, const std::string& field,
            const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": field '" + field +
                           "': " + what),
        file_(file),
        line_(line),
        field_(field) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string field_;
};

}  // namespace cdil
