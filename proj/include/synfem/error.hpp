#pragma once

#include <stdexcept>
#include <string>

namespace synfem {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Mesh violates conformity, orientation or convexity requirements.
class MeshError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, long index)
      : Error(what), index_(index) {}
  /// Offending row (or column) index, -1 when the backend does not report it.
  long index() const { return index_; }

 private:
  long index_;
};

/// A variable exponent left (1, inf) or its declared bounds.
class ExponentRangeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& pointer, const std::string& what)
      : Error(pointer + ": " + what), pointer_(pointer) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace synfem
