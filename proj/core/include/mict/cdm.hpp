#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mict/diagnostics.hpp"
#include "mict/equipment.hpp"
#include "mict/parameters.hpp"
#include "mict/protocol.hpp"

namespace mict {

// A named, typed value owned by a component. A prompted parameter asks the
// clinician for a case-specific value; it may only carry a default when that
// default is marked overridable.
struct Parameter {
  std::string name;
  ParameterKind kind = ParameterKind::Real;
  Dimension dimension = Dimension::Dimensionless;
  std::optional<ParameterValue> value;
  bool prompt = false;
  bool overridable = false;
  std::vector<std::string> choices;

  bool operator==(const Parameter&) const = default;
};

enum class ComponentKind { NumericalModel, Equipment, Organ, Protocol };

const char* to_string(ComponentKind k);
std::optional<ComponentKind> component_kind_from_string(std::string_view s);

struct ComponentDef {
  std::string id;
  ComponentKind kind = ComponentKind::NumericalModel;
  std::vector<Parameter> parameters;
  std::vector<std::string> tags;
  std::optional<EquipmentDef> equipment;  // Equipment components
  std::optional<Protocol> protocol;       // Protocol components

  bool has_tag(const std::string& tag) const;
  bool operator==(const ComponentDef&) const = default;
};

// Fields are component tags or "*". A rule applies when every field matches.
struct CombinationRule {
  std::string model = "*";
  std::string equipment = "*";
  std::string organ = "*";
  std::string protocol = "*";
  bool allowed = true;

  bool operator==(const CombinationRule&) const = default;
};

class ComponentLibrary {
 public:
  ComponentLibrary() = default;
  ComponentLibrary(std::vector<ComponentDef> components, std::vector<CombinationRule> rules);

  const std::vector<ComponentDef>& components() const { return components_; }
  const std::vector<CombinationRule>& rules() const { return rules_; }
  const ComponentDef* find(const std::string& id) const;
  std::vector<const ComponentDef*> of_kind(ComponentKind kind) const;

  // Structural checks: unique ids, non-empty tags, prompt/default
  // consistency, protocol step invariants, and rule determinism.
  std::vector<Issue> validate() const;

  // Explicit rules first; otherwise allowed when the model, equipment and
  // protocol share at least one tag. Empty optional when two matching rules
  // disagree.
  std::optional<bool> allowed(const ComponentDef& model, const ComponentDef& equipment,
                              const ComponentDef& organ, const ComponentDef& protocol) const;

 private:
  std::vector<ComponentDef> components_;  // sorted by id
  std::vector<CombinationRule> rules_;
};

struct LibraryLoad {
  ComponentLibrary library;
  std::vector<Issue> issues;
  bool ok() const { return issues.empty(); }
};

LibraryLoad parse_library(const std::string& xml_text);
LibraryLoad load_library(const std::filesystem::path& path);

struct ResolvedParameter {
  Parameter definition;
  ParameterValue value;
  std::string source;  // component id or "case"

  bool operator==(const ResolvedParameter&) const = default;
};

struct Composition {
  std::map<std::string, ResolvedParameter> parameters;
  std::vector<std::string> demands;  // prompted parameters nobody supplied, sorted
  const ComponentDef* model = nullptr;
  const ComponentDef* equipment = nullptr;
  const ComponentDef* organ = nullptr;
  const ComponentDef* protocol = nullptr;
};

// Resolves one value per parameter with precedence
// case_overrides > protocol > equipment > organ > model. Throws
// DisallowedCombination, Ambiguity (a name given twice at one level), or
// InvalidArgument (unknown id or wrong component kind).
Composition compose(const ComponentLibrary& library, const std::string& model_id,
                    const std::string& equipment_id, const std::string& organ_id,
                    const std::string& protocol_id, const std::vector<Parameter>& case_overrides);

// Attempts every allowed model/equipment/organ/protocol combination and
// reports each composition error.
std::vector<Issue> check_compositions(const ComponentLibrary& library);

}  // namespace mict
