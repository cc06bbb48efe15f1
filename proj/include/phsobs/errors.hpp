#pragma once

#include <stdexcept>
#include <string>

namespace phsobs {

// Ill-posed input: wrong dimensions, missing data, malformed configuration.
// Distinct from a well-formed system that merely violates an invariant.
class StructuralError : public std::runtime_error {
 public:
  explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

// Well-formed data that fails a mathematical requirement (definiteness,
// symmetry, duality conditions, ...).
class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

// Time integration aborted; carries the step index at which it happened.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, long step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace phsobs
