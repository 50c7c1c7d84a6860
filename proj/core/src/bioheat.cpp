#include "mict/bioheat.hpp"

#include <algorithm>
#include <cmath>

#include "mict/error.hpp"

namespace mict {

MaterialMap MaterialMap::uniform(const GridSpec& grid, const TissueProperties& props) {
  MaterialMap m;
  m.grid = grid;
  m.tissues = {props};
  m.index.assign(grid.voxel_count(), 0);
  m.perfusion_scale.assign(grid.voxel_count(), 1.0);
  return m;
}

ScalarField MaterialMap::conductivity() const {
  ScalarField k(grid, Unit::Dimensionless);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = at(i).conductivity;
  return k;
}

void MaterialMap::validate() const {
  const std::size_t n = grid.voxel_count();
  if (index.size() != n || perfusion_scale.size() != n)
    throw Error(ErrorCode::ShapeMismatch, "material map does not match its grid");
  for (auto i : index)
    if (i >= tissues.size()) throw Error(ErrorCode::InvalidArgument, "material index out of range");
}

ThermalBoundary ThermalBoundary::dirichlet(double temperature) {
  ThermalBoundary b;
  b.temperature = temperature;
  return b;
}

ThermalBoundary ThermalBoundary::zero_flux() {
  ThermalBoundary b;
  b.faces.fill(FaceCondition::ZeroFlux);
  return b;
}

std::vector<std::uint8_t> ThermalBoundary::classify(const GridSpec& grid) const {
  std::vector<std::uint8_t> kind(grid.voxel_count(), 0);
  const auto [nx, ny, nz] = grid.dims;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const bool shell = (i == 0 && faces[0] == FaceCondition::Dirichlet) ||
                           (i == nx - 1 && faces[1] == FaceCondition::Dirichlet) ||
                           (j == 0 && faces[2] == FaceCondition::Dirichlet) ||
                           (j == ny - 1 && faces[3] == FaceCondition::Dirichlet) ||
                           (k == 0 && faces[4] == FaceCondition::Dirichlet) ||
                           (k == nz - 1 && faces[5] == FaceCondition::Dirichlet);
        if (shell) kind[grid.index(i, j, k)] = 1;
      }
  for (auto idx : fixed_voxels) {
    if (idx >= kind.size()) throw Error(ErrorCode::Domain, "fixed voxel outside the grid");
    kind[idx] = 2;
  }
  return kind;
}

ThermalState initial_state(const GridSpec& grid, double temperature) {
  return {ScalarField(grid, Unit::Kelvin, temperature), 0.0};
}

namespace {

void check_inputs(const ThermalState& state, const MaterialMap& m, const ScalarField& q, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (!(state.temperature.grid() == m.grid) || !(q.grid() == m.grid))
    throw Error(ErrorCode::ShapeMismatch, "bioheat inputs do not share one grid");
}

// One implicit solve of cap (T - T_old)/dt = L T + Q - w (T - T_body) with
// held voxels, written for the increment over T* (T_old with held values).
ScalarField implicit_solve(const ScalarField& t_old, const std::vector<double>& cap, const std::vector<double>& omega,
                           const DiffusionOperator& op, const ScalarField& q, double dt,
                           const std::vector<std::uint8_t>& kind, const std::vector<std::uint8_t>& active,
                           const ThermalBoundary& boundary, const BioheatOptions& options, StepStats* stats) {
  const std::size_t n = t_old.size();
  const auto& grid = t_old.grid();
  std::vector<double> t_star(t_old.values().begin(), t_old.values().end());
  for (std::size_t i = 0; i < n; ++i) {
    if (kind[i] == 1) t_star[i] = boundary.temperature;
    else if (kind[i] == 2) t_star[i] = boundary.fixed_temperature;
  }
  thread_local std::vector<double> lt, rhs, diag_inv, mass, tmp, delta;
  for (auto* v : {&lt, &rhs, &diag_inv, &mass, &tmp, &delta}) v->assign(n, 0.0);
  op.apply(t_star, lt);
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    mass[i] = cap[i] / dt + omega[i];
    rhs[i] = q[i] + omega[i] * (options.body_temperature - t_star[i]) + lt[i];
    diag_inv[i] = 1.0 / (mass[i] + op.diagonal(i));
  }
  const LinearOperator apply = [&](std::span<const double> x, std::span<double> y) {
    op.apply(x, tmp);
    for (std::size_t i = 0; i < n; ++i) y[i] = mass[i] * x[i] - tmp[i];
  };
  const CgResult res = solve_pcg(apply, diag_inv, rhs, delta, active, options.cg);
  if (!res.converged)
    throw SolverError("bioheat CG did not converge after " + std::to_string(res.iterations) + " iterations",
                      res.relative_residual);
  ScalarField out(grid, Unit::Kelvin, std::move(t_star));
  for (std::size_t i = 0; i < n; ++i)
    if (active[i]) out[i] += delta[i];
  if (stats) {
    stats->cg_iterations += res.iterations;
    stats->cg_residual = res.relative_residual;
    double heat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      op.for_each_neighbour(i, [&](std::size_t j, double g) {
        if (!active[j]) heat += g * (out[j] - out[i]);
      });
    }
    stats->fixed_heat = heat * grid.voxel_volume_m3() * dt;
  }
  return out;
}

std::vector<std::uint8_t> active_from(const std::vector<std::uint8_t>& kind) {
  std::vector<std::uint8_t> a(kind.size());
  for (std::size_t i = 0; i < kind.size(); ++i) a[i] = kind[i] == 0 ? 1 : 0;
  return a;
}

}  // namespace

BioheatSolver::BioheatSolver(const MaterialMap& materials, const ThermalBoundary& boundary,
                             const BioheatOptions& options)
    : materials_(materials), boundary_(boundary), options_(options) {
  materials_.validate();
  op_ = DiffusionOperator(materials_.conductivity());
  kind_ = boundary_.classify(materials_.grid);
  active_ = active_from(kind_);
}

void BioheatSolver::set_perfusion_scale(std::vector<double> scale) {
  if (scale.size() != materials_.grid.voxel_count())
    throw Error(ErrorCode::ShapeMismatch, "perfusion scale does not match the grid");
  materials_.perfusion_scale = std::move(scale);
}

ThermalState BioheatSolver::step(const ThermalState& state, const ScalarField& q_inst, double dt,
                                 StepStats* stats) const {
  check_inputs(state, materials_, q_inst, dt);
  const std::size_t n = materials_.grid.voxel_count();
  std::vector<double> cap(n), omega(n);
  for (std::size_t i = 0; i < n; ++i) {
    cap[i] = materials_.at(i).heat_capacity();
    omega[i] = materials_.perfusion(i);
  }
  if (stats) *stats = {};
  ThermalState next{implicit_solve(state.temperature, cap, omega, op_, q_inst, dt, kind_, active_, boundary_,
                                   options_, stats),
                    state.time + dt};
  return next;
}

ThermalState step_bioheat(const ThermalState& state, const MaterialMap& materials, const ScalarField& q_inst,
                          double dt, const ThermalBoundary& boundary, const BioheatOptions& options,
                          StepStats* stats) {
  return BioheatSolver(materials, boundary, options).step(state, q_inst, dt, stats);
}

EffectiveProperties effective_properties(double t, const TissueProperties& p) {
  if (!p.has_phase_change() || t > p.liquidus) return {p.specific_heat, p.conductivity};
  if (t < p.solidus) return {p.frozen_specific_heat, p.frozen_conductivity};
  const double width = p.liquidus - p.solidus;
  const double s = (t - p.solidus) / width;
  return {p.specific_heat + p.latent_heat / width, p.frozen_conductivity + s * (p.conductivity - p.frozen_conductivity)};
}

double volumetric_enthalpy(double t, const TissueProperties& p) {
  if (!p.has_phase_change()) return p.density * p.specific_heat * t;
  if (t < p.solidus) return p.frozen_density * p.frozen_specific_heat * (t - p.solidus);
  const double width = p.liquidus - p.solidus;
  const double mushy = p.density * (p.specific_heat + p.latent_heat / width);
  if (t <= p.liquidus) return mushy * (t - p.solidus);
  return mushy * width + p.density * p.specific_heat * (t - p.liquidus);
}

namespace {

double volumetric_capacity(double t, const TissueProperties& p) {
  if (!p.has_phase_change() || t > p.liquidus) return p.density * p.specific_heat;
  if (t < p.solidus) return p.frozen_density * p.frozen_specific_heat;
  return p.density * (p.specific_heat + p.latent_heat / (p.liquidus - p.solidus));
}

// Inverse of volumetric_enthalpy; it is piecewise linear and increasing.
double temperature_at_enthalpy(double h, const TissueProperties& p) {
  if (!p.has_phase_change()) return h / (p.density * p.specific_heat);
  if (h < 0.0) return p.solidus + h / (p.frozen_density * p.frozen_specific_heat);
  const double width = p.liquidus - p.solidus;
  const double mushy = p.density * (p.specific_heat + p.latent_heat / width);
  if (h <= mushy * width) return p.solidus + h / mushy;
  return p.liquidus + (h - mushy * width) / (p.density * p.specific_heat);
}

}  // namespace

ThermalState step_cryo(const ThermalState& state, const MaterialMap& materials, const ScalarField& q_inst, double dt,
                       const ThermalBoundary& boundary, const BioheatOptions& options, StepStats* stats) {
  check_inputs(state, materials, q_inst, dt);
  materials.validate();
  const auto& grid = materials.grid;
  const std::size_t n = grid.voxel_count();
  const auto kind = boundary.classify(grid);
  const auto active = active_from(kind);
  std::vector<double> omega(n), cap(n);
  for (std::size_t i = 0; i < n; ++i) omega[i] = materials.perfusion(i);

  const ScalarField& t_old = state.temperature;
  ScalarField iterate = t_old;
  for (std::size_t i = 0; i < n; ++i) {
    if (kind[i] == 1) iterate[i] = boundary.temperature;
    else if (kind[i] == 2) iterate[i] = boundary.fixed_temperature;
  }
  ScalarField k(grid, Unit::Dimensionless);
  StepStats local;
  std::vector<double> history;
  double relax = 1.0;
  ScalarField base(grid, Unit::Kelvin);
  for (int it = 0; it < options.picard_max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = materials.at(i);
      const double t1 = iterate[i];
      // Enthalpy linearized about the iterate: cap (T - base) equals
      // H(T1) - H(T_old) + C(T1) (T - T1), so the step's enthalpy balance is
      // exact at convergence even across the latent-heat jump.
      cap[i] = volumetric_capacity(t1, p);
      base[i] = t1 - (volumetric_enthalpy(t1, p) - volumetric_enthalpy(t_old[i], p)) / cap[i];
      k[i] = effective_properties(t1, p).conductivity;
    }
    const DiffusionOperator op(k);
    StepStats s;
    ScalarField next = implicit_solve(base, cap, omega, op, q_inst, dt, kind, active, boundary, options, &s);
    local.cg_iterations += s.cg_iterations;
    local.cg_residual = s.cg_residual;
    local.fixed_heat = s.fixed_heat;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - iterate[i]));
    history.push_back(change);
    // Damp after a growing change, recover while it shrinks.
    if (history.size() >= 2 && change >= history[history.size() - 2]) relax = std::max(0.25, relax * 0.5);
    else relax = std::min(1.0, relax * 2.0);
    if (change < options.picard_tolerance) {
      local.picard_iterations = it + 1;
      local.picard_history = history;
      if (stats) *stats = local;
      return {std::move(next), state.time + dt};
    }
    // Update through the enthalpy rather than T: a tangent step that would
    // jump across the mushy zone lands on it instead, which breaks the
    // two-cycles a plain T update falls into at sharp fronts.
    for (std::size_t i = 0; i < n; ++i) {
      if (kind[i] != 0) continue;
      const auto& p = materials.at(i);
      const double h = volumetric_enthalpy(iterate[i], p) + relax * cap[i] * (next[i] - iterate[i]);
      iterate[i] = temperature_at_enthalpy(h, p);
    }
  }
  throw SolverError("cryo Picard iteration did not converge in " + std::to_string(options.picard_max_iterations) +
                        " iterations",
                    history.empty() ? 0.0 : history.back(), history);
}

}  // namespace mict
