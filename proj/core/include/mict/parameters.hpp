#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mict/units.hpp"

namespace mict {

enum class ParameterKind { Real, Integer, Boolean, Enum };

const char* to_string(ParameterKind kind);
std::optional<ParameterKind> parameter_kind_from_string(std::string_view s);

// Reals are held in SI units; enums as their choice string.
using ParameterValue = std::variant<double, long long, bool, std::string>;

std::string format_value(const ParameterValue& v, Dimension dim);

enum class ParameterScope { Global, Tissue };

struct ParameterSpec {
  std::string name;
  ParameterScope scope = ParameterScope::Global;
  ParameterKind kind = ParameterKind::Real;
  Dimension dimension = Dimension::Dimensionless;
  std::optional<ParameterValue> default_value;
  std::vector<std::string> choices;
};

// Every parameter the engine understands. Tissue-scoped parameters appear in
// resolved sets either bare ("thermal_conductivity", applying to every tissue)
// or qualified by tissue name ("liver.thermal_conductivity").
const std::vector<ParameterSpec>& parameter_registry();
const ParameterSpec* find_parameter_spec(std::string_view name);
// Splits "tissue.name" into {"tissue", "name"}; bare names give {"", name}.
std::pair<std::string, std::string> split_scoped_name(std::string_view name);

}  // namespace mict
