#pragma once

#include <cstdint>
#include <functional>
#include <span>

namespace mict {

struct CgOptions {
  double relative_tolerance = 1e-8;
  int max_iterations = 2000;
};

struct CgResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

// Jacobi-preconditioned conjugate gradients for a symmetric positive-definite
// operator restricted to the rows where `active` is non-zero. Inactive entries
// of x are left untouched and are treated as zero inside the iteration, so
// callers must move any known values into b beforehand. Reductions run in a
// fixed order, which makes repeated solves bit-identical.
CgResult solve_pcg(const LinearOperator& apply, std::span<const double> inverse_diagonal,
                   std::span<const double> b, std::span<double> x,
                   std::span<const std::uint8_t> active, const CgOptions& options = {});

}  // namespace mict
