#pragma once

#include <map>
#include <string>
#include <vector>

namespace mict {

// RFA tine point in the probe frame: `axial` mm along the probe direction
// from the tip (negative is behind the tip), `radial` mm off-axis at
// `angle_deg` about the axis.
struct TinePoint {
  double axial = 0.0;
  double radial = 0.0;
  double angle_deg = 0.0;
  double weight = 1.0;

  bool operator==(const TinePoint&) const = default;
};

struct EmPoint {
  double temperature = 310.0;  // K
  double permittivity = 1.0;   // relative
  double conductivity = 0.0;   // S/m

  bool operator==(const EmPoint&) const = default;
};

// Piecewise-linear EM properties over temperature; breakpoints ascending.
using EmTable = std::vector<EmPoint>;

struct EquipmentDef {
  std::string id;
  std::vector<TinePoint> tines;
  std::map<std::string, EmTable> em_tables;  // tissue name -> table

  bool operator==(const EquipmentDef&) const = default;
};

}  // namespace mict
