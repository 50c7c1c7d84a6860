#pragma once

#include <string>
#include <vector>

#include "mict/diagnostics.hpp"

namespace mict {

// Per-tissue constants in SI units. Phase change is active when
// latent_heat > 0; the frozen properties then apply below the solidus.
struct TissueProperties {
  double density = 0.0;                 // kg/m^3
  double specific_heat = 0.0;           // J/kg/K
  double conductivity = 0.0;            // W/m/K
  double perfusion = 0.0;               // W/m^3/K
  double electrical_conductivity = 0.0; // S/m
  double relative_permittivity = 1.0;
  double latent_heat = 0.0;             // J/kg
  double solidus = 0.0;                 // K
  double liquidus = 0.0;                // K
  double frozen_density = 0.0;
  double frozen_specific_heat = 0.0;
  double frozen_conductivity = 0.0;

  bool has_phase_change() const { return latent_heat > 0.0; }
  // Volumetric heat capacity rho*c of the unfrozen tissue.
  double heat_capacity() const { return density * specific_heat; }
  std::vector<Issue> validate(const std::string& name) const;

  bool operator==(const TissueProperties&) const = default;
};

// Unfrozen constants with the frozen overrides copied from them.
TissueProperties make_tissue(double density, double specific_heat, double conductivity, double perfusion);

}  // namespace mict
