#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "mict/field.hpp"
#include "mict/linear_solver.hpp"
#include "mict/stencil.hpp"
#include "mict/tissue.hpp"

namespace mict {

// Tissue assignment per voxel. perfusion_scale multiplies the tissue
// perfusion coefficient (0 inside TACE regions and dead tissue).
struct MaterialMap {
  GridSpec grid;
  std::vector<TissueProperties> tissues;
  std::vector<std::uint16_t> index;
  std::vector<double> perfusion_scale;

  static MaterialMap uniform(const GridSpec& grid, const TissueProperties& props);

  const TissueProperties& at(std::size_t idx) const { return tissues[index[idx]]; }
  double perfusion(std::size_t idx) const { return at(idx).perfusion * perfusion_scale[idx]; }
  ScalarField conductivity() const;
  void validate() const;
};

enum class FaceCondition { Dirichlet, ZeroFlux };

// Six shell faces in the order -x, +x, -y, +y, -z, +z. Voxels on a Dirichlet
// face are held at `temperature`; `fixed_voxels` (cryo probes) are held at
// `fixed_temperature`.
struct ThermalBoundary {
  std::array<FaceCondition, 6> faces{FaceCondition::Dirichlet, FaceCondition::Dirichlet, FaceCondition::Dirichlet,
                                     FaceCondition::Dirichlet, FaceCondition::Dirichlet, FaceCondition::Dirichlet};
  double temperature = 310.0;
  std::vector<std::size_t> fixed_voxels;
  double fixed_temperature = 310.0;

  static ThermalBoundary dirichlet(double temperature = 310.0);
  static ThermalBoundary zero_flux();

  // Per voxel: 0 free, 1 shell Dirichlet, 2 fixed voxel.
  std::vector<std::uint8_t> classify(const GridSpec& grid) const;
};

struct ThermalState {
  ScalarField temperature;  // K
  double time = 0.0;        // s
};

ThermalState initial_state(const GridSpec& grid, double temperature = 310.0);

struct BioheatOptions {
  CgOptions cg;
  double body_temperature = 310.0;
  double picard_tolerance = 0.01;  // K
  int picard_max_iterations = 25;
};

struct StepStats {
  int cg_iterations = 0;
  double cg_residual = 0.0;
  int picard_iterations = 0;
  std::vector<double> picard_history;  // max |dT| between iterates
  double fixed_heat = 0.0;  // J that entered the free voxels from held voxels during the step
};

// Backward-Euler step of rho c dT/dt = div(k grad T) + Q - w (T - T_body).
// Throws SolverError when CG does not converge.
class BioheatSolver {
 public:
  BioheatSolver(const MaterialMap& materials, const ThermalBoundary& boundary, const BioheatOptions& options = {});

  ThermalState step(const ThermalState& state, const ScalarField& q_inst, double dt, StepStats* stats = nullptr) const;

  void set_perfusion_scale(std::vector<double> scale);
  const MaterialMap& materials() const { return materials_; }
  const ThermalBoundary& boundary() const { return boundary_; }

 private:
  MaterialMap materials_;
  ThermalBoundary boundary_;
  BioheatOptions options_;
  DiffusionOperator op_;
  std::vector<std::uint8_t> kind_;
  std::vector<std::uint8_t> active_;
};

ThermalState step_bioheat(const ThermalState& state, const MaterialMap& materials, const ScalarField& q_inst,
                          double dt, const ThermalBoundary& boundary, const BioheatOptions& options = {},
                          StepStats* stats = nullptr);

struct EffectiveProperties {
  double specific_heat;  // J/kg/K
  double conductivity;   // W/m/K
};

// Effective heat capacity method: latent heat spread over the mushy interval,
// conductivity linear between frozen and unfrozen across it.
EffectiveProperties effective_properties(double temperature, const TissueProperties& props);

// Volumetric enthalpy (J/m^3) relative to the solidus; its derivative is the
// volumetric effective heat capacity.
double volumetric_enthalpy(double temperature, const TissueProperties& props);

// Cryo step: Picard iteration on the phase-change properties with the
// probes held at the coolant temperature (boundary.fixed_voxels). Converged
// when max |dT| between iterates < options.picard_tolerance. Throws
// SolverError carrying the iterate history when it does not converge.
ThermalState step_cryo(const ThermalState& state, const MaterialMap& materials, const ScalarField& q_inst, double dt,
                       const ThermalBoundary& boundary, const BioheatOptions& options = {},
                       StepStats* stats = nullptr);

}  // namespace mict
