#include "mict/tissue.hpp"

#include <cmath>

namespace mict {

TissueProperties make_tissue(double density, double specific_heat, double conductivity, double perfusion) {
  TissueProperties t;
  t.density = t.frozen_density = density;
  t.specific_heat = t.frozen_specific_heat = specific_heat;
  t.conductivity = t.frozen_conductivity = conductivity;
  t.perfusion = perfusion;
  return t;
}

std::vector<Issue> TissueProperties::validate(const std::string& name) const {
  std::vector<Issue> issues;
  const std::string scope = "tissue:" + name;
  auto positive = [&](double v, const char* param) {
    if (!(v > 0.0) || !std::isfinite(v)) issues.push_back({"invalid-value", param, scope, "must be positive"});
  };
  positive(density, "density");
  positive(specific_heat, "specific_heat_capacity");
  positive(conductivity, "thermal_conductivity");
  if (!(perfusion >= 0.0) || !std::isfinite(perfusion))
    issues.push_back({"invalid-value", "perfusion_coefficient", scope, "must be non-negative"});
  if (!(electrical_conductivity >= 0.0))
    issues.push_back({"invalid-value", "electrical_conductivity", scope, "must be non-negative"});
  if (!(relative_permittivity >= 1.0))
    issues.push_back({"invalid-value", "relative_permittivity", scope, "must be at least 1"});
  if (latent_heat < 0.0) issues.push_back({"invalid-value", "latent_heat", scope, "must be non-negative"});
  if (has_phase_change()) {
    if (!(solidus > 0.0) || !(solidus < liquidus))
      issues.push_back({"invalid-value", "solidus_temperature", scope, "solidus must be positive and below liquidus"});
    positive(frozen_density, "frozen_density");
    positive(frozen_specific_heat, "frozen_specific_heat_capacity");
    positive(frozen_conductivity, "frozen_thermal_conductivity");
  }
  return issues;
}

}  // namespace mict
