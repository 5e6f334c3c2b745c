#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zlab {

// Every failure raised by the library carries one of these categories. The
// C API maps them one-to-one onto zlab_status codes and the CLI onto exit
// codes.
enum class ErrorKind {
  Domain,          // argument outside the documented domain / contract
  Parse,           // malformed input file
  Io,              // cannot open / write a file
  Numerical,       // quadrature did not converge, NaN detected, ...
  GridMismatch,    // inputs defined on incompatible grids
  Resource,        // memory guard exceeded
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

class GridMismatchError : public Error {
 public:
  explicit GridMismatchError(const std::string& what)
      : Error(ErrorKind::GridMismatch, what) {}
};

class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& what) : Error(ErrorKind::Resource, what) {}
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}
}  // namespace detail

}  // namespace zlab
