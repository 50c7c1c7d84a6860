#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace mict {

enum class Dimension {
  Dimensionless,
  Temperature,
  TemperatureCelsius,  // accepted by the parser only to report a mismatch
  Length,
  Time,
  Power,
  Voltage,
  Frequency,
  ElectricField,
  Resistance,
  Rate,
  InverseTemperature,
  Density,
  SpecificHeat,
  ThermalConductivity,
  PerfusionCoefficient,
  ElectricalConductivity,
  LatentHeat,
};

const char* to_string(Dimension d);

struct UnitInfo {
  Dimension dimension;
  double scale;        // SI value = scale * given value
  const char* si_name; // canonical SI spelling for this dimension
};

// Recognised unit spellings ("mm", "W/m/K", "V/cm", "1", ...). The empty string
// is dimensionless.
std::optional<UnitInfo> lookup_unit(std::string_view unit);
// Canonical unit string written for a dimension. Length is written in mm.
const char* canonical_unit(Dimension d);
// Scale from the canonical unit to SI.
double canonical_scale(Dimension d);

}  // namespace mict
