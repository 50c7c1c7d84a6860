#include "mict/units.hpp"

#include <array>

namespace mict {

const char* to_string(Dimension d) {
  switch (d) {
    case Dimension::Dimensionless: return "dimensionless";
    case Dimension::Temperature: return "temperature";
    case Dimension::TemperatureCelsius: return "temperature (Celsius)";
    case Dimension::Length: return "length";
    case Dimension::Time: return "time";
    case Dimension::Power: return "power";
    case Dimension::Voltage: return "voltage";
    case Dimension::Frequency: return "frequency";
    case Dimension::ElectricField: return "electric field";
    case Dimension::Resistance: return "resistance";
    case Dimension::Rate: return "rate";
    case Dimension::InverseTemperature: return "inverse temperature";
    case Dimension::Density: return "density";
    case Dimension::SpecificHeat: return "specific heat capacity";
    case Dimension::ThermalConductivity: return "thermal conductivity";
    case Dimension::PerfusionCoefficient: return "perfusion coefficient";
    case Dimension::ElectricalConductivity: return "electrical conductivity";
    case Dimension::LatentHeat: return "latent heat";
  }
  return "?";
}

namespace {

struct Entry {
  std::string_view name;
  Dimension dim;
  double scale;
};

constexpr std::array kUnits = {
    Entry{"", Dimension::Dimensionless, 1.0},
    Entry{"1", Dimension::Dimensionless, 1.0},
    Entry{"K", Dimension::Temperature, 1.0},
    Entry{"degC", Dimension::TemperatureCelsius, 1.0},
    Entry{"\xC2\xB0""C", Dimension::TemperatureCelsius, 1.0},
    Entry{"C", Dimension::TemperatureCelsius, 1.0},
    Entry{"m", Dimension::Length, 1.0},
    Entry{"cm", Dimension::Length, 1e-2},
    Entry{"mm", Dimension::Length, 1e-3},
    Entry{"s", Dimension::Time, 1.0},
    Entry{"ms", Dimension::Time, 1e-3},
    Entry{"us", Dimension::Time, 1e-6},
    Entry{"min", Dimension::Time, 60.0},
    Entry{"W", Dimension::Power, 1.0},
    Entry{"mW", Dimension::Power, 1e-3},
    Entry{"kW", Dimension::Power, 1e3},
    Entry{"V", Dimension::Voltage, 1.0},
    Entry{"kV", Dimension::Voltage, 1e3},
    Entry{"Hz", Dimension::Frequency, 1.0},
    Entry{"kHz", Dimension::Frequency, 1e3},
    Entry{"MHz", Dimension::Frequency, 1e6},
    Entry{"GHz", Dimension::Frequency, 1e9},
    Entry{"V/m", Dimension::ElectricField, 1.0},
    Entry{"V/cm", Dimension::ElectricField, 1e2},
    Entry{"ohm", Dimension::Resistance, 1.0},
    Entry{"\xCE\xA9", Dimension::Resistance, 1.0},
    Entry{"kohm", Dimension::Resistance, 1e3},
    Entry{"1/s", Dimension::Rate, 1.0},
    Entry{"s^-1", Dimension::Rate, 1.0},
    Entry{"1/K", Dimension::InverseTemperature, 1.0},
    Entry{"kg/m^3", Dimension::Density, 1.0},
    Entry{"g/cm^3", Dimension::Density, 1e3},
    Entry{"J/kg/K", Dimension::SpecificHeat, 1.0},
    Entry{"W/m/K", Dimension::ThermalConductivity, 1.0},
    Entry{"W/m^3/K", Dimension::PerfusionCoefficient, 1.0},
    Entry{"S/m", Dimension::ElectricalConductivity, 1.0},
    Entry{"J/kg", Dimension::LatentHeat, 1.0},
    Entry{"kJ/kg", Dimension::LatentHeat, 1e3},
};

}  // namespace

std::optional<UnitInfo> lookup_unit(std::string_view unit) {
  for (const auto& e : kUnits)
    if (e.name == unit) return UnitInfo{e.dim, e.scale, canonical_unit(e.dim)};
  return std::nullopt;
}

const char* canonical_unit(Dimension d) {
  switch (d) {
    case Dimension::Dimensionless: return "1";
    case Dimension::Temperature: return "K";
    case Dimension::TemperatureCelsius: return "degC";
    case Dimension::Length: return "mm";
    case Dimension::Time: return "s";
    case Dimension::Power: return "W";
    case Dimension::Voltage: return "V";
    case Dimension::Frequency: return "Hz";
    case Dimension::ElectricField: return "V/m";
    case Dimension::Resistance: return "ohm";
    case Dimension::Rate: return "1/s";
    case Dimension::InverseTemperature: return "1/K";
    case Dimension::Density: return "kg/m^3";
    case Dimension::SpecificHeat: return "J/kg/K";
    case Dimension::ThermalConductivity: return "W/m/K";
    case Dimension::PerfusionCoefficient: return "W/m^3/K";
    case Dimension::ElectricalConductivity: return "S/m";
    case Dimension::LatentHeat: return "J/kg";
  }
  return "1";
}

double canonical_scale(Dimension d) { return d == Dimension::Length ? 1e-3 : 1.0; }

}  // namespace mict
