#include "mict/linear_solver.hpp"

#include <cmath>
#include <vector>

namespace mict {

CgResult solve_pcg(const LinearOperator& apply, std::span<const double> inverse_diagonal,
                   std::span<const double> b, std::span<double> x,
                   std::span<const std::uint8_t> active, const CgOptions& options) {
  const std::size_t n = b.size();
  // Per-thread scratch: large solves run every time step, and reusing the
  // buffers avoids page-fault churn from fresh allocations.
  thread_local std::vector<double> r, z, p, q, xa;
  for (auto* v : {&r, &z, &p, &q, &xa}) v->assign(n, 0.0);

  double bnorm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (active[i]) {
      bnorm2 += b[i] * b[i];
      xa[i] = x[i];
    }
  CgResult result;
  const double bnorm = std::sqrt(bnorm2);
  if (bnorm == 0.0) {
    for (std::size_t i = 0; i < n; ++i)
      if (active[i]) x[i] = 0.0;
    result.converged = true;
    return result;
  }

  apply(xa, q);
  double rz = 0.0, rnorm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    r[i] = b[i] - q[i];
    z[i] = r[i] * inverse_diagonal[i];
    p[i] = z[i];
    rz += r[i] * z[i];
    rnorm2 += r[i] * r[i];
  }
  result.relative_residual = std::sqrt(rnorm2) / bnorm;
  while (result.relative_residual > options.relative_tolerance &&
         result.iterations < options.max_iterations) {
    apply(p, q);
    double pq = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (active[i]) pq += p[i] * q[i];
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    double rz_next = 0.0;
    rnorm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      xa[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      z[i] = r[i] * inverse_diagonal[i];
      rz_next += r[i] * z[i];
      rnorm2 += r[i] * r[i];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i)
      if (active[i]) p[i] = z[i] + beta * p[i];
    ++result.iterations;
    result.relative_residual = std::sqrt(rnorm2) / bnorm;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (active[i]) x[i] = xa[i];
  result.converged = result.relative_residual <= options.relative_tolerance;
  return result;
}

}  // namespace mict
