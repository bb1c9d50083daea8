#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctcalign {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or record.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The compressed sequence is shorter than the shortest accepting path.
class AlignmentInfeasible : public Error {
 public:
  AlignmentInfeasible(std::size_t steps, std::size_t min_steps);
  std::size_t steps() const { return steps_; }
  std::size_t min_steps() const { return min_steps_; }

 private:
  std::size_t steps_;
  std::size_t min_steps_;
};

// Every token died: all reachable paths have probability zero.
class NumericallyInfeasible : public Error {
 public:
  explicit NumericallyInfeasible(std::size_t step);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class InstanceTooLarge : public Error {
 public:
  using Error::Error;
};

}  // namespace ctcalign
