#include "mict/parameters.hpp"

#include <cmath>

#include "mict/io_util.hpp"

namespace mict {

const char* to_string(ParameterKind kind) {
  switch (kind) {
    case ParameterKind::Real: return "real";
    case ParameterKind::Integer: return "integer";
    case ParameterKind::Boolean: return "boolean";
    case ParameterKind::Enum: return "enum";
  }
  return "?";
}

std::optional<ParameterKind> parameter_kind_from_string(std::string_view s) {
  if (s == "real") return ParameterKind::Real;
  if (s == "integer") return ParameterKind::Integer;
  if (s == "boolean") return ParameterKind::Boolean;
  if (s == "enum") return ParameterKind::Enum;
  return std::nullopt;
}

std::string format_value(const ParameterValue& v, Dimension dim) {
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d / canonical_scale(dim));
  if (const auto* i = std::get_if<long long>(&v)) return std::to_string(*i);
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return std::get<std::string>(v);
}

namespace {

ParameterSpec real(std::string name, Dimension dim, std::optional<double> def = std::nullopt,
                   ParameterScope scope = ParameterScope::Global) {
  ParameterSpec s{std::move(name), scope, ParameterKind::Real, dim, std::nullopt, {}};
  if (def) s.default_value = *def;
  return s;
}

ParameterSpec tissue(std::string name, Dimension dim) {
  return real(std::move(name), dim, std::nullopt, ParameterScope::Tissue);
}

std::vector<ParameterSpec> build_registry() {
  using D = Dimension;
  std::vector<ParameterSpec> r;
  r.push_back({"modality", ParameterScope::Global, ParameterKind::Enum, D::Dimensionless, std::nullopt,
               {"RFA", "MWA", "CRYO", "IRE"}});
  // thermal model
  r.push_back(real("body_temperature", D::Temperature, 310.0));
  r.push_back(real("initial_temperature", D::Temperature));
  r.push_back(real("boundary_temperature", D::Temperature, 310.0));
  r.push_back({"boundary_condition", ParameterScope::Global, ParameterKind::Enum, D::Dimensionless,
               std::string("dirichlet"), {"dirichlet", "zero_flux"}});
  r.push_back(real("thermal_dt", D::Time, 0.5));
  r.push_back({"perfusion_stops_in_lesion", ParameterScope::Global, ParameterKind::Boolean, D::Dimensionless, true, {}});
  r.push_back(real("cg_tolerance", D::Dimensionless, 1e-8));
  r.push_back({"cg_max_iterations", ParameterScope::Global, ParameterKind::Integer, D::Dimensionless, 2000LL, {}});
  r.push_back(real("max_simulated_time", D::Time, 7200.0));
  // Cell death (three-state model). Literature fixture values: the forward
  // rate 3.33e-3 1/s is quoted against temperature in Celsius, so it is
  // rescaled here for the kelvin form exp(T / T_k).
  r.push_back(real("death_forward_rate", D::Rate, 3.33e-3 * std::exp(-273.15 / 40.5)));
  r.push_back(real("death_backward_rate", D::Rate, 7.77e-3));
  r.push_back(real("death_temperature_scale", D::Temperature, 40.5));
  r.push_back(real("initial_vulnerable_fraction", D::Dimensionless, 0.01));
  r.push_back(real("lesion_threshold", D::Dimensionless, 0.8));
  // probes and protocol signals
  r.push_back(real("applied_power", D::Power));
  r.push_back(real("probe_radius", D::Length, 1e-3));
  r.push_back(real("active_length", D::Length, 20e-3));
  r.push_back(real("probe_signal_radius", D::Length, 2e-3));
  r.push_back({"repeat_cap", ParameterScope::Global, ParameterKind::Integer, D::Dimensionless, 10LL, {}});
  // RFA
  r.push_back(real("rfa_gaussian_width", D::Length, 2e-3));
  r.push_back(real("rfa_conductivity_slope", D::InverseTemperature, 0.02));
  r.push_back(real("impedance_update_interval", D::Time, 10.0));
  // MWA
  r.push_back(real("mwa_frequency", D::Frequency, 2.45e9));
  r.push_back(real("mwa_slot_offset", D::Length, 5e-3));
  r.push_back(real("mwa_slot_width", D::Length, 1e-3));
  r.push_back(real("mwa_rz_resolution", D::Length, 0.5e-3));
  r.push_back(real("mwa_rz_radius", D::Length, 30e-3));
  r.push_back(real("mwa_rz_behind", D::Length, 45e-3));
  r.push_back(real("mwa_rz_ahead", D::Length, 20e-3));
  r.push_back(real("mwa_reflected_fraction", D::Dimensionless, 0.0));
  r.push_back(real("mwa_resolve_threshold", D::Temperature, 5.0));
  // cryoablation
  r.push_back(real("coolant_temperature", D::Temperature, 113.0));
  r.push_back(real("lethal_temperature", D::Temperature, 233.0));
  r.push_back({"two_freeze_cycles", ParameterScope::Global, ParameterKind::Boolean, D::Dimensionless, false, {}});
  r.push_back(real("picard_tolerance", D::Temperature, 0.01));
  r.push_back({"picard_max_iterations", ParameterScope::Global, ParameterKind::Integer, D::Dimensionless, 25LL, {}});
  // IRE
  r.push_back(real("ire_field_threshold", D::ElectricField, 70000.0));
  r.push_back({"ire_functional", ParameterScope::Global, ParameterKind::Enum, D::Dimensionless,
               std::string("field_magnitude"), {"field_magnitude", "power_density"}});
  // tissue table
  r.push_back(tissue("density", D::Density));
  r.push_back(tissue("specific_heat_capacity", D::SpecificHeat));
  r.push_back(tissue("thermal_conductivity", D::ThermalConductivity));
  r.push_back(tissue("perfusion_coefficient", D::PerfusionCoefficient));
  r.push_back(tissue("electrical_conductivity", D::ElectricalConductivity));
  r.push_back(tissue("relative_permittivity", D::Dimensionless));
  r.push_back(tissue("latent_heat", D::LatentHeat));
  r.push_back(tissue("solidus_temperature", D::Temperature));
  r.push_back(tissue("liquidus_temperature", D::Temperature));
  r.push_back(tissue("frozen_density", D::Density));
  r.push_back(tissue("frozen_specific_heat_capacity", D::SpecificHeat));
  r.push_back(tissue("frozen_thermal_conductivity", D::ThermalConductivity));
  return r;
}

}  // namespace

const std::vector<ParameterSpec>& parameter_registry() {
  static const std::vector<ParameterSpec> registry = build_registry();
  return registry;
}

std::pair<std::string, std::string> split_scoped_name(std::string_view name) {
  const auto dot = name.rfind('.');
  if (dot == std::string_view::npos) return {"", std::string(name)};
  return {std::string(name.substr(0, dot)), std::string(name.substr(dot + 1))};
}

const ParameterSpec* find_parameter_spec(std::string_view name) {
  const auto [scope, bare] = split_scoped_name(name);
  for (const auto& s : parameter_registry())
    if (s.name == bare) {
      if (!scope.empty() && s.scope != ParameterScope::Tissue) return nullptr;
      return &s;
    }
  return nullptr;
}

}  // namespace mict
