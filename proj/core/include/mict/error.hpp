#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mict {

enum class ErrorCode {
  ShapeMismatch,
  Domain,
  InvalidArgument,
  MalformedHeader,
  SizeMismatch,
  UnsupportedElementType,
  Io,
  NonConvergence,
  DisallowedCombination,
  Ambiguity,
  Library,
  Validation,
  DegenerateSolve,
  EmptySurface,
  OverlappingElectrodes,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by iterative solvers. Carries the last residual and, for nonlinear
// loops, the max-update history of every iterate.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double final_residual,
              std::vector<double> history = {})
      : Error(ErrorCode::NonConvergence, what),
        final_residual_(final_residual),
        history_(std::move(history)) {}
  double final_residual() const noexcept { return final_residual_; }
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  double final_residual_;
  std::vector<double> history_;
};

}  // namespace mict
