#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qsym {

/// Input that violates a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point fell outside the closed region of a mesh.
class OutOfRegion : public std::out_of_range {
 public:
  OutOfRegion(const std::string& what, std::vector<double> point)
      : std::out_of_range(what), point_(std::move(point)) {}
  const std::vector<double>& point() const { return point_; }

 private:
  std::vector<double> point_;
};

/// A reduction was requested over a region that contains no nodes.
class EmptyRegion : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Iterative numerics failed in a way the caller must handle.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qsym
