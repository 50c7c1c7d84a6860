#include "mict/cdm.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "mict/error.hpp"
#include "mict/io_util.hpp"
#include "xml_util.hpp"

namespace mict {

const char* to_string(ComponentKind k) {
  switch (k) {
    case ComponentKind::NumericalModel: return "numerical-model";
    case ComponentKind::Equipment: return "equipment";
    case ComponentKind::Organ: return "organ";
    case ComponentKind::Protocol: return "protocol";
  }
  return "?";
}

std::optional<ComponentKind> component_kind_from_string(std::string_view s) {
  if (s == "numerical-model" || s == "model") return ComponentKind::NumericalModel;
  if (s == "equipment") return ComponentKind::Equipment;
  if (s == "organ") return ComponentKind::Organ;
  if (s == "protocol") return ComponentKind::Protocol;
  return std::nullopt;
}

bool ComponentDef::has_tag(const std::string& tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

ComponentLibrary::ComponentLibrary(std::vector<ComponentDef> components, std::vector<CombinationRule> rules)
    : components_(std::move(components)), rules_(std::move(rules)) {
  std::stable_sort(components_.begin(), components_.end(),
                   [](const ComponentDef& a, const ComponentDef& b) { return a.id < b.id; });
}

const ComponentDef* ComponentLibrary::find(const std::string& id) const {
  const auto it = std::lower_bound(components_.begin(), components_.end(), id,
                                   [](const ComponentDef& c, const std::string& v) { return c.id < v; });
  return it != components_.end() && it->id == id ? &*it : nullptr;
}

std::vector<const ComponentDef*> ComponentLibrary::of_kind(ComponentKind kind) const {
  std::vector<const ComponentDef*> out;
  for (const auto& c : components_)
    if (c.kind == kind) out.push_back(&c);
  return out;
}

namespace {

bool field_matches(const std::string& pattern, const ComponentDef& c) {
  return pattern == "*" || pattern == c.id || c.has_tag(pattern);
}

bool fields_overlap(const std::string& a, const std::string& b) { return a == "*" || b == "*" || a == b; }

bool rule_matches(const CombinationRule& r, const ComponentDef& m, const ComponentDef& e, const ComponentDef& o,
                  const ComponentDef& p) {
  return field_matches(r.model, m) && field_matches(r.equipment, e) && field_matches(r.organ, o) &&
         field_matches(r.protocol, p);
}

std::string rule_text(const CombinationRule& r) {
  return "(" + r.model + ", " + r.equipment + ", " + r.organ + ", " + r.protocol + ") -> " +
         (r.allowed ? "allow" : "deny");
}

}  // namespace

std::optional<bool> ComponentLibrary::allowed(const ComponentDef& model, const ComponentDef& equipment,
                                              const ComponentDef& organ, const ComponentDef& protocol) const {
  std::optional<bool> verdict;
  for (const auto& r : rules_) {
    if (!rule_matches(r, model, equipment, organ, protocol)) continue;
    if (verdict && *verdict != r.allowed) return std::nullopt;
    verdict = r.allowed;
  }
  if (verdict) return verdict;
  for (const auto& t : model.tags)
    if (equipment.has_tag(t) && protocol.has_tag(t)) return true;
  return false;
}

std::vector<Issue> ComponentLibrary::validate() const {
  std::vector<Issue> issues;
  for (std::size_t i = 1; i < components_.size(); ++i)
    if (components_[i].id == components_[i - 1].id)
      issues.push_back({"duplicate-id", "", "component:" + components_[i].id, "component id is not unique"});
  for (const auto& c : components_) {
    const std::string scope = "component:" + c.id;
    if (c.id.empty()) issues.push_back({"invalid-value", "", scope, "component without an id"});
    if (c.tags.empty()) issues.push_back({"missing-tags", "", scope, "compatibility tags must be non-empty"});
    std::set<std::string> seen;
    for (const auto& p : c.parameters) {
      if (!seen.insert(p.name).second)
        issues.push_back({"ambiguous-parameter", p.name, scope, "parameter defined twice in one component"});
      if (p.prompt && p.value && !p.overridable)
        issues.push_back({"prompt-conflict", p.name, scope,
                          "prompted parameter carries a default that is not marked overridable"});
    }
    if (c.kind == ComponentKind::Protocol) {
      if (!c.protocol) issues.push_back({"protocol", "", scope, "protocol component without steps"});
      else
        for (auto i : c.protocol->validate()) issues.push_back(std::move(i));
    }
  }
  for (std::size_t i = 0; i < rules_.size(); ++i)
    for (std::size_t j = i + 1; j < rules_.size(); ++j) {
      const auto& a = rules_[i];
      const auto& b = rules_[j];
      if (a.allowed != b.allowed && fields_overlap(a.model, b.model) && fields_overlap(a.equipment, b.equipment) &&
          fields_overlap(a.organ, b.organ) && fields_overlap(a.protocol, b.protocol))
        issues.push_back({"rule-conflict", "", "rules",
                          "contradictory overlapping rules " + rule_text(a) + " and " + rule_text(b)});
    }
  return issues;
}

LibraryLoad parse_library(const std::string& xml_text) {
  LibraryLoad out;
  auto& issues = out.issues;
  const auto tree = xml::parse(xml_text, issues);
  if (!tree) return out;
  const xml::Tree* root = xml::child(*tree, "library");
  if (!root) {
    issues.push_back({"xml", "", "document", "root element must be <library>"});
    return out;
  }
  if (!xml::attr(*root, "schema_version"))
    issues.push_back({"xml", "schema_version", "library", "missing schema_version attribute"});

  std::vector<ComponentDef> components;
  for (const xml::Tree* node : xml::children(*root, "component")) {
    ComponentDef c;
    c.id = xml::attr_or(*node, "id", "");
    const std::string scope = "component:" + c.id;
    const std::string kind = xml::attr_or(*node, "kind", "");
    const auto k = component_kind_from_string(kind);
    if (!k) {
      issues.push_back({"invalid-value", "kind", scope, "unknown component kind '" + kind + "'"});
      continue;
    }
    c.kind = *k;
    std::istringstream tags(xml::attr_or(*node, "tags", ""));
    for (std::string t; tags >> t;) c.tags.push_back(t);
    for (const xml::Tree* pn : xml::children(*node, "parameter"))
      if (auto p = xml::parse_parameter(*pn, scope, issues)) c.parameters.push_back(std::move(*p));
    if (c.kind == ComponentKind::Equipment) {
      if (auto e = xml::parse_equipment(*node, c.id, issues)) c.equipment = std::move(*e);
    }
    if (c.kind == ComponentKind::Protocol) {
      if (auto p = xml::parse_protocol(*node, issues)) c.protocol = std::move(*p);
    }
    components.push_back(std::move(c));
  }
  std::vector<CombinationRule> rules;
  for (const xml::Tree* node : xml::children(*root, "rule")) {
    CombinationRule r;
    r.model = xml::attr_or(*node, "model", "*");
    r.equipment = xml::attr_or(*node, "equipment", "*");
    r.organ = xml::attr_or(*node, "organ", "*");
    r.protocol = xml::attr_or(*node, "protocol", "*");
    bool allowed = true;
    if (!xml::parse_bool(xml::attr_or(*node, "allowed", "true"), allowed))
      issues.push_back({"invalid-value", "allowed", "rules", "rule 'allowed' must be a boolean"});
    r.allowed = allowed;
    rules.push_back(std::move(r));
  }
  out.library = ComponentLibrary(std::move(components), std::move(rules));
  for (auto& i : out.library.validate()) issues.push_back(std::move(i));
  return out;
}

LibraryLoad load_library(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    LibraryLoad out;
    out.issues.push_back({"io", "", path.string(), e.what()});
    return out;
  }
  return parse_library(text);
}

namespace {

const ComponentDef& require(const ComponentLibrary& lib, const std::string& id, ComponentKind kind) {
  const ComponentDef* c = lib.find(id);
  if (!c) throw Error(ErrorCode::InvalidArgument, "unknown component '" + id + "'");
  if (c->kind != kind)
    throw Error(ErrorCode::InvalidArgument,
                "component '" + id + "' is a " + to_string(c->kind) + ", expected " + to_string(kind));
  return *c;
}

}  // namespace

Composition compose(const ComponentLibrary& library, const std::string& model_id, const std::string& equipment_id,
                    const std::string& organ_id, const std::string& protocol_id,
                    const std::vector<Parameter>& case_overrides) {
  Composition out;
  out.model = &require(library, model_id, ComponentKind::NumericalModel);
  out.equipment = &require(library, equipment_id, ComponentKind::Equipment);
  out.organ = &require(library, organ_id, ComponentKind::Organ);
  out.protocol = &require(library, protocol_id, ComponentKind::Protocol);

  const auto verdict = library.allowed(*out.model, *out.equipment, *out.organ, *out.protocol);
  if (!verdict)
    throw Error(ErrorCode::DisallowedCombination, "combination rules disagree for (" + model_id + ", " +
                                                      equipment_id + ", " + organ_id + ", " + protocol_id + ")");
  if (!*verdict)
    throw Error(ErrorCode::DisallowedCombination, "combination (" + model_id + ", " + equipment_id + ", " +
                                                      organ_id + ", " + protocol_id + ") is not allowed");

  // Lowest precedence first.
  struct Level {
    const std::vector<Parameter>* params;
    std::string source;
  };
  const std::vector<Level> levels = {{&out.model->parameters, out.model->id},
                                     {&out.organ->parameters, out.organ->id},
                                     {&out.equipment->parameters, out.equipment->id},
                                     {&out.protocol->parameters, out.protocol->id},
                                     {&case_overrides, "case"}};

  std::map<std::string, Parameter> definitions;
  std::set<std::string> prompted;
  for (const auto& level : levels) {
    std::set<std::string> seen;
    for (const auto& p : *level.params) {
      if (!seen.insert(p.name).second)
        throw Error(ErrorCode::Ambiguity, "parameter '" + p.name + "' defined twice by " + level.source);
      auto [it, fresh] = definitions.try_emplace(p.name, p);
      if (!fresh && it->second.kind != p.kind)
        throw Error(ErrorCode::InvalidArgument, "parameter '" + p.name + "' changes kind in " + level.source);
      if (!fresh && it->second.kind == ParameterKind::Real && it->second.dimension != p.dimension)
        throw Error(ErrorCode::InvalidArgument, "parameter '" + p.name + "' changes unit in " + level.source);
      if (p.prompt) prompted.insert(p.name);
      if (p.value) {
        it->second.prompt = it->second.prompt || p.prompt;
        out.parameters[p.name] = ResolvedParameter{it->second, *p.value, level.source};
      }
    }
  }
  for (const auto& [name, def] : definitions) {
    if (out.parameters.count(name)) {
      out.parameters[name].definition.prompt = prompted.count(name) > 0;
      continue;
    }
    out.demands.push_back(name);
  }
  return out;
}

std::vector<Issue> check_compositions(const ComponentLibrary& library) {
  std::vector<Issue> issues;
  for (const auto* m : library.of_kind(ComponentKind::NumericalModel))
    for (const auto* e : library.of_kind(ComponentKind::Equipment))
      for (const auto* o : library.of_kind(ComponentKind::Organ))
        for (const auto* p : library.of_kind(ComponentKind::Protocol)) {
          const std::string scope = "composition:" + m->id + "/" + e->id + "/" + o->id + "/" + p->id;
          const auto verdict = library.allowed(*m, *e, *o, *p);
          if (!verdict) {
            issues.push_back({"rule-conflict", "", scope, "combination rules disagree"});
            continue;
          }
          if (!*verdict) continue;
          try {
            compose(library, m->id, e->id, o->id, p->id, {});
          } catch (const Error& err) {
            issues.push_back({to_string(err.code()), "", scope, err.what()});
          }
        }
  return issues;
}

}  // namespace mict
