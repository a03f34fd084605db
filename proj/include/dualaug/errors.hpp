#pragma once

#include <stdexcept>
#include <string>

namespace dualaug {

// Base of every domain error; the CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CycleError : public Error { using Error::Error; };
class ArityError : public Error { using Error::Error; };
class BehindCameraError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class NonScalarError : public Error { using Error::Error; };
class LengthError : public Error { using Error::Error; };
class EmptyBatchError : public Error { using Error::Error; };
class DegenerateError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

}  // namespace dualaug
