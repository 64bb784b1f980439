#pragma once

#include <stdexcept>
#include <string>

namespace boxoffice {

/// Base class for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, unknown config keys, violated preconditions.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A text row that failed to parse. Carries the file and 1-based line.
class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// A binary file with a bad magic, version or truncated payload.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite loss or other numerical breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace boxoffice
