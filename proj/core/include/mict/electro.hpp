#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mict/cell_death.hpp"
#include "mict/field.hpp"
#include "mict/linear_solver.hpp"

namespace mict {

struct ElectrodePair {
  std::string anode;
  std::string cathode;
  double potential = 0.0;       // V
  double active_length = 20.0;  // mm
  double radius = 1.0;          // mm

  void validate() const;
};

// div(sigma grad phi) = 0 with phi = potential on the anode voxels, 0 on the
// cathode voxels and zero flux on the shell. Throws OverlappingElectrodes,
// InvalidArgument (empty sets, sigma <= 0) or SolverError.
ScalarField solve_potential(const ScalarField& sigma, const std::vector<std::size_t>& anode,
                            const std::vector<std::size_t>& cathode, double potential, const CgOptions& options = {},
                            CgResult* result = nullptr);

// Electrodes rasterized as capped cylinders about each probe axis.
ScalarField solve_potential(const ScalarField& sigma, const ElectrodePair& pair, const Probe& anode,
                            const Probe& cathode, const CgOptions& options = {}, CgResult* result = nullptr);

// |grad phi| in V/m by central differences (one-sided on the shell).
ScalarField field_magnitude(const ScalarField& phi);

enum class FieldFunctional { Magnitude, PowerDensity };

// Pointwise maximum over protocol steps of |E| or 0.5 sigma |E|^2.
struct FieldAccumulator {
  ScalarField maximum;
  int steps = 0;
  FieldFunctional functional = FieldFunctional::Magnitude;

  static FieldAccumulator empty(const GridSpec& grid, FieldFunctional functional = FieldFunctional::Magnitude);
};

FieldAccumulator accumulate_field(const FieldAccumulator& acc, const ScalarField& phi, const ScalarField& sigma);

// Superlevel set {maximum >= threshold}. Throws InvalidArgument when
// threshold <= 0.
Lesion ire_lesion(const FieldAccumulator& acc, double threshold);

// Current (A) leaving the voxel set `region` through its boundary faces.
double enclosed_current(const ScalarField& phi, const ScalarField& sigma, const std::vector<std::uint8_t>& region);

// Voxel indicator of `voxels` grown by `layers` face-neighbour layers.
std::vector<std::uint8_t> dilate(const GridSpec& grid, const std::vector<std::size_t>& voxels, int layers);

// U / I with I the current leaving the anode set. Throws DegenerateSolve when
// I <= 0.
double impedance_proxy(const ScalarField& phi, const ScalarField& sigma, double potential,
                       const std::vector<std::size_t>& anode);

}  // namespace mict
