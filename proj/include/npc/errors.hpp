#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace npc {

/// Base class of every error thrown by the solver suite.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class DegenerateSystem : public Error {
 public:
  using Error::Error;
};

/// A corrector could not make progress at the requested level (singular
/// Jacobian, non-contracting Newton iteration, ...). The engine treats it as
/// a rejected step when the problem supports rollback.
class CorrectorFailure : public Error {
 public:
  using Error::Error;
};

class InvalidBandwidth : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace npc
