#include "mict/electro.hpp"

#include <algorithm>
#include <cmath>

#include "mict/error.hpp"
#include "mict/stencil.hpp"

namespace mict {

void ElectrodePair::validate() const {
  if (anode.empty() || cathode.empty()) throw Error(ErrorCode::InvalidArgument, "electrode pair needs two probe ids");
  if (anode == cathode) throw Error(ErrorCode::InvalidArgument, "anode and cathode must differ");
  if (!(potential > 0.0) || !std::isfinite(potential))
    throw Error(ErrorCode::InvalidArgument, "potential difference must be positive");
  if (!(active_length > 0.0) || !(radius > 0.0))
    throw Error(ErrorCode::InvalidArgument, "electrode geometry must be positive");
}

ScalarField solve_potential(const ScalarField& sigma, const std::vector<std::size_t>& anode,
                            const std::vector<std::size_t>& cathode, double potential, const CgOptions& options,
                            CgResult* result) {
  const auto& grid = sigma.grid();
  const std::size_t n = grid.voxel_count();
  if (anode.empty() || cathode.empty()) throw Error(ErrorCode::InvalidArgument, "electrode voxel set is empty");
  for (std::size_t i = 0; i < n; ++i)
    if (!(sigma[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "conductivity must be positive everywhere");
  std::vector<std::uint8_t> kind(n, 0);
  for (auto i : anode) {
    if (i >= n) throw Error(ErrorCode::Domain, "anode voxel outside the grid");
    kind[i] = 1;
  }
  for (auto i : cathode) {
    if (i >= n) throw Error(ErrorCode::Domain, "cathode voxel outside the grid");
    if (kind[i] == 1) throw Error(ErrorCode::OverlappingElectrodes, "anode and cathode voxels overlap");
    kind[i] = 2;
  }
  const DiffusionOperator op(sigma);
  std::vector<double> base(n, 0.0), lb(n), rhs(n, 0.0), inv(n, 0.0), x(n, 0.0);
  std::vector<std::uint8_t> act(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (kind[i] == 1) base[i] = potential;
    act[i] = kind[i] == 0;
  }
  op.apply(base, lb);
  for (std::size_t i = 0; i < n; ++i)
    if (act[i]) {
      rhs[i] = lb[i];
      inv[i] = 1.0 / op.diagonal(i);
    }
  std::vector<double> tmp(n);
  const LinearOperator apply = [&](std::span<const double> v, std::span<double> y) {
    op.apply(v, tmp);
    for (std::size_t i = 0; i < n; ++i) y[i] = -tmp[i];
  };
  const CgResult res = solve_pcg(apply, inv, rhs, x, act, options);
  if (result) *result = res;
  if (!res.converged)
    throw SolverError("potential CG did not converge after " + std::to_string(res.iterations) + " iterations",
                      res.relative_residual);
  ScalarField phi(grid, Unit::Volt, std::move(base));
  for (std::size_t i = 0; i < n; ++i)
    if (act[i]) phi[i] = x[i];
  return phi;
}

ScalarField solve_potential(const ScalarField& sigma, const ElectrodePair& pair, const Probe& anode,
                            const Probe& cathode, const CgOptions& options, CgResult* result) {
  pair.validate();
  const auto a = probe_voxels(sigma.grid(), anode, pair.radius, pair.active_length);
  const auto c = probe_voxels(sigma.grid(), cathode, pair.radius, pair.active_length);
  return solve_potential(sigma, a, c, pair.potential, options, result);
}

ScalarField field_magnitude(const ScalarField& phi) {
  const auto& g = phi.grid();
  ScalarField e(g, Unit::VoltPerMetre);
  const auto [nx, ny, nz] = g.dims;
  const Index3 dims = g.dims;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const Index3 c{i, j, k};
        double sum = 0.0;
        for (int a = 0; a < 3; ++a) {
          Index3 lo = c, hi = c;
          if (c[a] > 0) --lo[a];
          if (c[a] + 1 < dims[a]) ++hi[a];
          const double d = (hi[a] - lo[a]) * g.spacing[a] * 1e-3;
          const double grad = (phi.at(hi[0], hi[1], hi[2]) - phi.at(lo[0], lo[1], lo[2])) / d;
          sum += grad * grad;
        }
        e.at(i, j, k) = std::sqrt(sum);
      }
  return e;
}

FieldAccumulator FieldAccumulator::empty(const GridSpec& grid, FieldFunctional functional) {
  return {ScalarField(grid, functional == FieldFunctional::Magnitude ? Unit::VoltPerMetre : Unit::WattPerCubicMetre),
          0, functional};
}

FieldAccumulator accumulate_field(const FieldAccumulator& acc, const ScalarField& phi, const ScalarField& sigma) {
  if (!(phi.grid() == acc.maximum.grid()) || !(sigma.grid() == phi.grid()))
    throw Error(ErrorCode::ShapeMismatch, "field accumulator grids differ");
  ScalarField e = field_magnitude(phi);
  FieldAccumulator out = acc;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double v = acc.functional == FieldFunctional::Magnitude ? e[i] : 0.5 * sigma[i] * e[i] * e[i];
    out.maximum[i] = acc.steps == 0 ? v : std::max(acc.maximum[i], v);
  }
  ++out.steps;
  return out;
}

Lesion ire_lesion(const FieldAccumulator& acc, double threshold) {
  if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "IRE threshold must be positive");
  return extract_superlevel(acc.maximum, threshold);
}

double enclosed_current(const ScalarField& phi, const ScalarField& sigma, const std::vector<std::uint8_t>& region) {
  if (!(phi.grid() == sigma.grid()) || region.size() != phi.size())
    throw Error(ErrorCode::ShapeMismatch, "current inputs do not share one grid");
  const DiffusionOperator op(sigma);
  const double vol = phi.grid().voxel_volume_m3();
  double current = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (!region[i]) continue;
    op.for_each_neighbour(i, [&](std::size_t j, double g) {
      if (!region[j]) current += g * vol * (phi[i] - phi[j]);
    });
  }
  return current;
}

std::vector<std::uint8_t> dilate(const GridSpec& grid, const std::vector<std::size_t>& voxels, int layers) {
  std::vector<std::uint8_t> in(grid.voxel_count(), 0);
  for (auto v : voxels) in.at(v) = 1;
  for (int l = 0; l < layers; ++l) {
    std::vector<std::uint8_t> next = in;
    for (std::size_t idx = 0; idx < in.size(); ++idx) {
      if (!in[idx]) continue;
      const auto c = grid.coords(idx);
      for (int a = 0; a < 3; ++a)
        for (int s : {-1, 1}) {
          Index3 n = c;
          n[a] += s;
          if (grid.in_bounds(n[0], n[1], n[2])) next[grid.index(n[0], n[1], n[2])] = 1;
        }
    }
    in = std::move(next);
  }
  return in;
}

double impedance_proxy(const ScalarField& phi, const ScalarField& sigma, double potential,
                       const std::vector<std::size_t>& anode) {
  const double current = enclosed_current(phi, sigma, dilate(phi.grid(), anode, 0));
  if (!(current > 0.0)) throw Error(ErrorCode::DegenerateSolve, "no current leaves the anode");
  return potential / current;
}

}  // namespace mict
