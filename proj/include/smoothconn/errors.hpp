#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smoothconn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Expression / problem-file syntax errors; carries a character offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " (at offset " + std::to_string(pos) + ")"), pos_(pos) {}
  std::size_t position() const { return pos_; }

 private:
  std::size_t pos_;
};

// Rank deficiency, failed projections, points off the variety.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Solver-level failures: budget exceeded, refinement failure, bad imports.
class SolveError : public Error {
 public:
  using Error::Error;
};

// Trajectory integration failures.
class FlowError : public Error {
 public:
  using Error::Error;
};

}  // namespace smoothconn
