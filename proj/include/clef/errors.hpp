#pragma once

#include <stdexcept>
#include <string>

namespace clef {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

class NonInvertibleValue : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidHorizon : public Error {
 public:
  using Error::Error;
};

class InvalidIntervention : public Error {
 public:
  using Error::Error;
};

class UnknownCondition : public Error {
 public:
  using Error::Error;
};

class SimulationDiverged : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

class DataLeakage : public Error {
 public:
  using Error::Error;
};

/// Raised by every reader; `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace clef
