#pragma once

#include <stdexcept>
#include <string>

namespace treegrad {

// Shape disagreement between operands. Messages name both shapes.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument values: empty lists, non-positive sizes, malformed config.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Broken graph bookkeeping: a second backward through an already drained
// node, or a function producing gradients that do not match its inputs.
struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation needs state the object does not hold (e.g. backward on a chain
// with no blocks).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value where a finite one is required.
struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss. Carries the 1-based step index.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, const std::string& message)
      : std::runtime_error(message), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace treegrad
