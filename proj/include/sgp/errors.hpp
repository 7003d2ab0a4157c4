#pragma once

#include <stdexcept>
#include <string>

namespace sgp {

// Error taxonomy. The MCMC trainer and the CLI catch these by type and turn
// them into rejected proposals / exit codes; everything else lets them
// propagate.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed caller input: dimension mismatches, bad files, empty sets.
class InputError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid hyperparameters: nonpositive scales, unresolved slot
// references, out-of-bounds vectors where bounds are a hard precondition.
class HyperparameterError : public Error {
 public:
  using Error::Error;
};

// A kernel or field produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Covariance assembly failed: duplicate coordinates, worker failure.
class AssemblyError : public Error {
 public:
  using Error::Error;
};

// A matrix that must be positive definite is not, even after jitter.
class DefinitenessError : public Error {
 public:
  using Error::Error;
};

// Bad configuration file or override.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The chain produced no usable state.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Checkpoint does not match the referenced training data.
class StaleCheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgp
