#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mara {

/// Bad argument value, shape, or dimension.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two atoms coincide (or nearly so) where a direction is required.
class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Attention logits or another intermediate became non-finite.
class NumericalOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A gradient was requested for a node that does not feed the output.
class MissingDependency : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UndefinedRatio : public std::domain_error {
 public:
  UndefinedRatio(std::size_t index, const std::string& what)
      : std::domain_error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Malformed text input. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that lacks a required field.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Molecular dynamics hit non-finite forces or positions. Carries the
/// offending frame for diagnosis.
class SimulationAbort : public std::runtime_error {
 public:
  SimulationAbort(std::size_t step, const std::string& what, std::vector<std::array<double, 3>> frame = {})
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step), frame_(std::move(frame)) {}
  std::size_t step() const noexcept { return step_; }
  const std::vector<std::array<double, 3>>& frame() const noexcept { return frame_; }

 private:
  std::size_t step_;
  std::vector<std::array<double, 3>> frame_;
};

}  // namespace mara
