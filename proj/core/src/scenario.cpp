#include "mict/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mict/error.hpp"
#include "mict/io_util.hpp"
#include "mict/volume_io.hpp"
#include "xml_util.hpp"

namespace mict {

const char* to_string(Modality m) {
  switch (m) {
    case Modality::Rfa: return "RFA";
    case Modality::Mwa: return "MWA";
    case Modality::Cryo: return "CRYO";
    case Modality::Ire: return "IRE";
  }
  return "?";
}

std::optional<Modality> modality_from_string(std::string_view s) {
  if (s == "RFA") return Modality::Rfa;
  if (s == "MWA") return Modality::Mwa;
  if (s == "CRYO") return Modality::Cryo;
  if (s == "IRE") return Modality::Ire;
  return std::nullopt;
}

namespace {

const ParameterValue* lookup(const ScenarioDoc& d, const std::string& name) {
  if (const auto it = d.parameters.find(name); it != d.parameters.end() && it->second.value) return &*it->second.value;
  if (const ParameterSpec* s = find_parameter_spec(name); s && s->default_value) return &*s->default_value;
  return nullptr;
}

template <typename T>
T typed(const ScenarioDoc& d, const std::string& name) {
  const ParameterValue* v = lookup(d, name);
  if (!v) throw Error(ErrorCode::InvalidArgument, "parameter '" + name + "' has no value");
  if (const T* t = std::get_if<T>(v)) return *t;
  throw Error(ErrorCode::InvalidArgument, "parameter '" + name + "' has another kind");
}

}  // namespace

double ScenarioDoc::real(const std::string& name) const {
  const ParameterValue* v = lookup(*this, name);
  if (v) {
    if (const auto* i = std::get_if<long long>(v)) return static_cast<double>(*i);
  }
  return typed<double>(*this, name);
}
long long ScenarioDoc::integer(const std::string& name) const { return typed<long long>(*this, name); }
bool ScenarioDoc::boolean(const std::string& name) const { return typed<bool>(*this, name); }
std::string ScenarioDoc::choice(const std::string& name) const { return typed<std::string>(*this, name); }

const RegionDef* ScenarioDoc::region(std::uint8_t rid) const {
  for (const auto& r : regions)
    if (r.id == rid) return &r;
  return nullptr;
}

const Probe* ScenarioDoc::probe(const std::string& pid) const {
  for (const auto& p : probes)
    if (p.id == pid) return &p;
  return nullptr;
}

const EquipmentDef* ScenarioDoc::equipment_for(const Probe& p) const {
  const auto it = equipment.find(p.equipment_id);
  return it == equipment.end() ? nullptr : &it->second;
}

namespace {

bool inside(const Primitive& prim, const Vec3& x) {
  if (const auto* s = std::get_if<Sphere>(&prim)) return distance(x, s->center) <= s->radius;
  const auto& b = std::get<Box>(prim);
  for (int a = 0; a < 3; ++a)
    if (x[a] < b.lower[a] || x[a] > b.upper[a]) return false;
  return true;
}

Legend legend_of(const std::vector<RegionDef>& regions) {
  Legend legend;
  for (const auto& r : regions) legend[r.id] = r.name;
  legend[0] = legend.count(0) ? legend[0] : "background";
  return legend;
}

}  // namespace

LabelMask ScenarioDoc::region_mask() const {
  if (mask) return *mask;
  LabelMask m(grid, legend_of(regions));
  for (std::size_t idx = 0; idx < grid.voxel_count(); ++idx) {
    const Vec3 x = grid.world(idx);
    std::uint8_t label = 0;
    for (const auto& r : regions)
      for (const auto& prim : r.primitives)
        if (inside(prim, x)) label = r.id;
    if (label) m.set(idx, label);
  }
  return m;
}

double ScenarioDoc::trace_impedance(double t) const {
  if (impedance_trace.empty()) return 0.0;
  if (t <= impedance_trace.front().time) return impedance_trace.front().value;
  for (std::size_t i = 1; i < impedance_trace.size(); ++i) {
    const auto& a = impedance_trace[i - 1];
    const auto& b = impedance_trace[i];
    if (t <= b.time) return a.value + (b.value - a.value) * (t - a.time) / (b.time - a.time);
  }
  return impedance_trace.back().value;
}

namespace {

struct TissueField {
  const char* param;
  double TissueProperties::*member;
};

constexpr TissueField kTissueFields[] = {
    {"density", &TissueProperties::density},
    {"specific_heat_capacity", &TissueProperties::specific_heat},
    {"thermal_conductivity", &TissueProperties::conductivity},
    {"perfusion_coefficient", &TissueProperties::perfusion},
    {"electrical_conductivity", &TissueProperties::electrical_conductivity},
    {"relative_permittivity", &TissueProperties::relative_permittivity},
    {"latent_heat", &TissueProperties::latent_heat},
    {"solidus_temperature", &TissueProperties::solidus},
    {"liquidus_temperature", &TissueProperties::liquidus},
    {"frozen_density", &TissueProperties::frozen_density},
    {"frozen_specific_heat_capacity", &TissueProperties::frozen_specific_heat},
    {"frozen_thermal_conductivity", &TissueProperties::frozen_conductivity},
};

class Parser {
 public:
  Parser(const ParseContext& ctx, std::vector<Issue>& issues) : ctx_(ctx), issues_(issues) {}

  std::optional<ScenarioDoc> run(const std::string& text);

 private:
  void issue(std::string kind, std::string param, std::string scope, std::string msg) {
    issues_.push_back({std::move(kind), std::move(param), std::move(scope), std::move(msg)});
  }
  std::optional<Vec3> length_triple(const xml::Tree& node, const char* name, const std::string& scope,
                                    bool required = true);
  std::optional<double> length(const xml::Tree& node, const char* name, const std::string& scope);
  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : std::filesystem::absolute(ctx_.base_dir / path).lexically_normal();
  }

  void parse_grid(const xml::Tree& root);
  void parse_regions(const xml::Tree& root);
  void parse_probes(const xml::Tree& root);
  void parse_parameters(const xml::Tree& root);
  void parse_misc(const xml::Tree& root);
  void resolve_composition();
  void resolve_tissues();
  void check_probes_and_protocol();

  const ParseContext& ctx_;
  std::vector<Issue>& issues_;
  ScenarioDoc doc_;
  bool have_grid_ = false;
  std::optional<Modality> modality_;
  std::vector<Parameter> overrides_;
  std::optional<Protocol> inline_protocol_;
  std::map<std::string, EquipmentDef> inline_equipment_;
  LibraryLoad loaded_;
};

std::optional<Vec3> Parser::length_triple(const xml::Tree& node, const char* name, const std::string& scope,
                                          bool required) {
  const auto raw = xml::attr(node, name);
  if (!raw) {
    if (required) issue("missing-parameter", name, scope, std::string("missing attribute '") + name + "'");
    return std::nullopt;
  }
  std::array<double, 3> v;
  if (!xml::parse_triple(*raw, v)) {
    issue("invalid-value", name, scope, "'" + *raw + "' is not three numbers");
    return std::nullopt;
  }
  const std::string unit = xml::attr_or(node, "unit", "");
  const auto info = lookup_unit(unit);
  if (!info) {
    issue("unknown-unit", name, scope, "unknown unit '" + unit + "'");
    return std::nullopt;
  }
  if (info->dimension != Dimension::Length) {
    issue("unit-mismatch", name, scope, "expected a length unit (mm), got '" + unit + "'");
    return std::nullopt;
  }
  const double s = info->scale * 1e3;
  return Vec3{v[0] * s, v[1] * s, v[2] * s};
}

std::optional<double> Parser::length(const xml::Tree& node, const char* name, const std::string& scope) {
  const auto raw = xml::attr(node, name);
  if (!raw) {
    issue("missing-parameter", name, scope, std::string("missing attribute '") + name + "'");
    return std::nullopt;
  }
  double v;
  if (!parse_double(*raw, v) || !std::isfinite(v)) {
    issue("invalid-value", name, scope, "'" + *raw + "' is not a number");
    return std::nullopt;
  }
  const std::string unit = xml::attr_or(node, "unit", "");
  const auto info = lookup_unit(unit);
  if (!info || info->dimension != Dimension::Length) {
    issue("unit-mismatch", name, scope, "expected a length unit (mm), got '" + unit + "'");
    return std::nullopt;
  }
  return v * info->scale * 1e3;
}

void Parser::parse_grid(const xml::Tree& root) {
  const xml::Tree* g = xml::child(root, "grid");
  if (!g) return;
  const std::string scope = "grid";
  std::istringstream in(xml::attr_or(*g, "dims", ""));
  Index3 dims{};
  int n = 0;
  for (std::string tok; in >> tok && n < 4; ++n) {
    double v;
    if (n == 3 || !parse_double(tok, v) || v != std::floor(v) || v < 0 || v > 1e6) {
      n = -1;
      break;
    }
    dims[n] = static_cast<int>(v);
  }
  if (n != 3) {
    issue("invalid-value", "dims", scope, "dims must be three non-negative integers");
    return;
  }
  const auto spacing = length_triple(*g, "spacing", scope);
  const auto origin = length_triple(*g, "origin", scope);
  if (!spacing || !origin) return;
  GridSpec grid{dims, *spacing, *origin};
  try {
    grid.validate();
  } catch (const Error& e) {
    issue("invalid-value", "grid", scope, e.what());
    return;
  }
  doc_.grid = grid;
  have_grid_ = true;
}

void Parser::parse_regions(const xml::Tree& root) {
  const xml::Tree* rs = xml::child(root, "regions");
  if (!rs) {
    issue("missing-parameter", "regions", "regions", "scenario needs a <regions> table");
    return;
  }
  if (const auto m = xml::attr(*rs, "mask")) {
    const auto path = resolve(*m);
    doc_.mask_file = path.string();
    try {
      const Volume v = read_volume(path);
      if (v.type != ElementType::UInt8) {
        issue("invalid-value", "mask", "regions", "region mask must be an 8-bit volume");
      } else if (have_grid_ && !(v.grid == doc_.grid)) {
        issue("invalid-value", "mask", "regions", "region mask grid differs from <grid>");
      } else {
        doc_.grid = v.grid;
        have_grid_ = true;
        doc_.mask = to_mask(v);
      }
    } catch (const Error& e) {
      issue("io", "mask", "regions", e.what());
    }
  }
  std::set<int> ids;
  for (const xml::Tree* rn : xml::children(*rs, "region")) {
    RegionDef r;
    const std::string raw_id = xml::attr_or(*rn, "id", "");
    double id;
    const std::string scope = "region:" + raw_id;
    if (!parse_double(raw_id, id) || id != std::floor(id) || id < 0 || id > 255) {
      issue("invalid-value", "id", scope, "region id must be an integer in 0..255");
      continue;
    }
    r.id = static_cast<std::uint8_t>(id);
    if (!ids.insert(r.id).second) issue("invalid-value", "id", scope, "region id defined twice");
    r.name = xml::attr_or(*rn, "name", r.id == 0 ? "background" : "region" + raw_id);
    r.tissue = xml::attr_or(*rn, "tissue", "");
    if (r.tissue.empty() || r.tissue.find('.') != std::string::npos)
      issue("missing-parameter", "tissue", scope, "region needs a tissue name without '.'");
    bool perf = true;
    if (const auto p = xml::attr(*rn, "perfusion"); p && !xml::parse_bool(*p, perf))
      issue("invalid-value", "perfusion", scope, "perfusion must be a boolean");
    r.perfusion = perf;
    for (const auto& [tag, sub] : *rn) {
      if (tag == "sphere") {
        const auto c = length_triple(sub, "center", scope);
        const auto rad = length(sub, "radius", scope);
        if (c && rad) r.primitives.push_back(Sphere{*c, *rad});
      } else if (tag == "box") {
        const auto lo = length_triple(sub, "lower", scope);
        const auto hi = length_triple(sub, "upper", scope);
        if (lo && hi) r.primitives.push_back(Box{*lo, *hi});
      }
    }
    doc_.regions.push_back(std::move(r));
  }
  if (!ids.count(0)) issue("missing-parameter", "region 0", "regions", "region 0 (background) must be bound");
  if (doc_.mask) {
    for (const auto& r : doc_.regions)
      if (r.id != 0 && doc_.mask->count(r.id) == 0)
        issue("unknown-region", "", "region:" + std::to_string(r.id), "region id not present in the mask");
    for (const auto& [id, name] : doc_.mask->legend())
      if (!ids.count(id))
        issue("unbound-region", "", "region:" + std::to_string(id), "mask label has no region binding");
    if (issues_.empty()) doc_.mask = LabelMask(doc_.grid, std::vector<std::uint8_t>(doc_.mask->labels().begin(),
                                                                                  doc_.mask->labels().end()),
                                               legend_of(doc_.regions));
  }
}

void Parser::parse_probes(const xml::Tree& root) {
  for (const xml::Tree* pn : xml::children(root, "probe")) {
    Probe p;
    p.id = xml::attr_or(*pn, "id", "");
    const std::string scope = "probe:" + p.id;
    if (p.id.empty()) issue("invalid-value", "id", scope, "probe needs an id");
    if (doc_.probe(p.id)) issue("invalid-value", "id", scope, "probe id defined twice");
    try {
      p.kind = probe_kind_from_string(xml::attr_or(*pn, "kind", ""));
    } catch (const Error& e) {
      issue("invalid-value", "kind", scope, e.what());
    }
    p.equipment_id = xml::attr_or(*pn, "equipment", "");
    const auto tip = length_triple(*pn, "tip", scope);
    std::array<double, 3> dir{};
    if (!xml::parse_triple(xml::attr_or(*pn, "direction", ""), dir)) {
      issue("invalid-value", "direction", scope, "direction must be three numbers");
      continue;
    }
    if (!tip) continue;
    p.tip = *tip;
    p.direction = dir;
    try {
      p.validate();
    } catch (const Error& e) {
      issue("invalid-value", "direction", scope, e.what());
      continue;
    }
    doc_.probes.push_back(std::move(p));
  }
}

void Parser::parse_parameters(const xml::Tree& root) {
  for (const xml::Tree* tn : xml::children(root, "tissue")) {
    const std::string name = xml::attr_or(*tn, "name", "");
    const std::string scope = "tissue:" + name;
    if (name.empty()) {
      issue("invalid-value", "name", scope, "tissue needs a name");
      continue;
    }
    for (const xml::Tree* pn : xml::children(*tn, "parameter"))
      if (auto p = xml::parse_parameter(*pn, scope, issues_, name + ".")) {
        const ParameterSpec* spec = find_parameter_spec(p->name);
        if (!spec || spec->scope != ParameterScope::Tissue) {
          issue("invalid-value", p->name, scope, "not a tissue parameter");
          continue;
        }
        overrides_.push_back(std::move(*p));
      }
  }
  if (const xml::Tree* ps = xml::child(root, "parameters"))
    for (const xml::Tree* pn : xml::children(*ps, "parameter"))
      if (auto p = xml::parse_parameter(*pn, "global", issues_)) overrides_.push_back(std::move(*p));
}

void Parser::parse_misc(const xml::Tree& root) {
  if (const xml::Tree* pn = xml::child(root, "protocol")) inline_protocol_ = xml::parse_protocol(*pn, issues_);
  for (const xml::Tree* en : xml::children(root, "equipment")) {
    const std::string id = xml::attr_or(*en, "id", "");
    if (auto e = xml::parse_equipment(*en, id, issues_)) inline_equipment_[id] = std::move(*e);
  }
  if (const xml::Tree* tn = xml::child(root, "impedance_trace")) {
    for (const xml::Tree* pt : xml::children(*tn, "point")) {
      const auto t = xml::parse_quantity(xml::attr_or(*pt, "time", ""), Dimension::Time, "time", "impedance_trace", issues_);
      const auto v = xml::parse_quantity(xml::attr_or(*pt, "value", ""), Dimension::Resistance, "value",
                                         "impedance_trace", issues_);
      if (t && v) {
        if (!doc_.impedance_trace.empty() && !(*t > doc_.impedance_trace.back().time))
          issue("invalid-value", "time", "impedance_trace", "trace times must increase");
        doc_.impedance_trace.push_back({*t, *v});
      }
    }
  }
  if (const xml::Tree* on = xml::child(root, "outputs")) {
    if (const auto s = xml::attr(*on, "snapshot_every")) {
      if (const auto v = xml::parse_quantity(*s, Dimension::Time, "snapshot_every", "outputs", issues_)) {
        if (*v < 0) issue("invalid-value", "snapshot_every", "outputs", "cadence must be non-negative");
        doc_.outputs.snapshot_every = *v;
      }
    }
    static const std::set<std::string> known = {"temperature", "damage", "sar", "potential", "field"};
    std::istringstream in(xml::attr_or(*on, "fields", ""));
    for (std::string f; in >> f;) {
      if (!known.count(f)) issue("invalid-value", "fields", "outputs", "unknown output field '" + f + "'");
      else doc_.outputs.fields.push_back(f);
    }
  }
}

void Parser::resolve_composition() {
  for (const auto& p : overrides_) {
    if (p.prompt && !p.value) issue("missing-parameter", p.name, "global", "prompted parameter needs a value");
  }
  if (doc_.composition) {
    const ComponentLibrary* lib = ctx_.library;
    if (!lib) {
      loaded_ = load_library(doc_.composition->library);
      for (const auto& i : loaded_.issues)
        issue("library", i.parameter, i.scope.empty() ? doc_.composition->library : i.scope, i.message);
      if (!loaded_.ok()) return;
      lib = &loaded_.library;
    }
    const auto& c = *doc_.composition;
    try {
      Composition comp = compose(*lib, c.model, c.equipment, c.organ, c.protocol, overrides_);
      for (auto& [name, rp] : comp.parameters) {
        Parameter p = rp.definition;
        p.value = rp.value;
        p.prompt = p.overridable = false;
        doc_.parameters[name] = std::move(p);
      }
      for (const auto& d : comp.demands) issue("missing-parameter", d, "composition", "no component supplies a value");
      if (comp.protocol->protocol) doc_.protocol = *comp.protocol->protocol;
      if (comp.equipment->equipment) doc_.equipment[comp.equipment->id] = *comp.equipment->equipment;
    } catch (const Error& e) {
      const std::string kind = e.code() == ErrorCode::Ambiguity ? "ambiguity"
                               : e.code() == ErrorCode::DisallowedCombination ? "disallowed-combination"
                                                                               : "composition";
      issue(kind, "", "composition", e.what());
    }
  } else {
    for (const auto& p : overrides_) {
      if (doc_.parameters.count(p.name)) {
        issue("ambiguity", p.name, "global", "parameter given twice");
        continue;
      }
      Parameter q = p;
      q.prompt = q.overridable = false;
      if (q.value) doc_.parameters[p.name] = std::move(q);
    }
  }
  if (inline_protocol_) doc_.protocol = *inline_protocol_;
  for (auto& [id, e] : inline_equipment_) doc_.equipment[id] = e;
  // Materialize registry defaults so the resolved document is explicit.
  for (const auto& spec : parameter_registry()) {
    if (spec.scope != ParameterScope::Global || !spec.default_value || doc_.parameters.count(spec.name)) continue;
    doc_.parameters[spec.name] = Parameter{spec.name, spec.kind, spec.dimension, spec.default_value, false, false,
                                           spec.choices};
  }
  // The scenario attribute wins; a model-supplied modality must agree.
  if (const auto it = doc_.parameters.find("modality"); it != doc_.parameters.end() && it->second.value) {
    const auto m = modality_from_string(std::get<std::string>(*it->second.value));
    if (modality_ && m && *m != *modality_)
      issue("invalid-value", "modality", "global", "scenario modality disagrees with the numerical model");
    if (!modality_) modality_ = m;
  }
  if (!modality_) issue("unknown-modality", "modality", "scenario", "no modality given");
  else {
    doc_.modality = *modality_;
    doc_.parameters["modality"] = Parameter{"modality", ParameterKind::Enum, Dimension::Dimensionless,
                                            std::string(to_string(*modality_)), false, false,
                                            find_parameter_spec("modality")->choices};
  }
}

void Parser::resolve_tissues() {
  if (!modality_) return;
  std::set<std::string> names;
  for (const auto& r : doc_.regions)
    if (!r.tissue.empty() && r.tissue.find('.') == std::string::npos) names.insert(r.tissue);
  bool em_from_tables = true;
  for (const auto& p : doc_.probes) {
    const EquipmentDef* e = doc_.equipment_for(p);
    for (const auto& n : names)
      if (!e || !e->em_tables.count(n)) em_from_tables = false;
  }
  const bool rfa_impedance = *modality_ == Modality::Rfa && doc_.protocol.uses_signal(Signal::Impedance) &&
                             doc_.impedance_trace.empty();
  std::set<std::string> required = {"density", "specific_heat_capacity", "thermal_conductivity",
                                    "perfusion_coefficient"};
  if (*modality_ == Modality::Ire || rfa_impedance) required.insert("electrical_conductivity");
  if (*modality_ == Modality::Mwa && !em_from_tables) {
    required.insert("electrical_conductivity");
    required.insert("relative_permittivity");
  }
  if (*modality_ == Modality::Cryo) {
    required.insert("latent_heat");
    required.insert("solidus_temperature");
    required.insert("liquidus_temperature");
  }
  for (const auto& n : names) {
    TissueProperties t;
    std::set<std::string> given;
    for (const auto& f : kTissueFields) {
      const Parameter* p = nullptr;
      if (auto it = doc_.parameters.find(n + "." + f.param); it != doc_.parameters.end()) p = &it->second;
      else if (auto jt = doc_.parameters.find(f.param); jt != doc_.parameters.end()) p = &jt->second;
      if (p && p->value) {
        t.*f.member = std::get<double>(*p->value);
        given.insert(f.param);
      }
    }
    // Values already rejected during parsing would only cascade.
    bool complete = std::none_of(issues_.begin(), issues_.end(),
                                 [&](const Issue& i) { return i.scope == "tissue:" + n; });
    for (const auto& f : kTissueFields)
      if (required.count(f.param) && !given.count(f.param) &&
          std::none_of(issues_.begin(), issues_.end(),
                       [&](const Issue& i) { return i.scope == "tissue:" + n && i.parameter == f.param; })) {
        issue("missing-parameter", f.param, "tissue:" + n, std::string("tissue '") + n + "' needs " + f.param);
        complete = false;
      }
    if (!given.count("frozen_density")) t.frozen_density = t.density;
    if (!given.count("frozen_specific_heat_capacity")) t.frozen_specific_heat = t.specific_heat;
    if (!given.count("frozen_thermal_conductivity")) t.frozen_conductivity = t.conductivity;
    if (complete)
      for (auto& i : t.validate(n)) issues_.push_back(std::move(i));
    doc_.tissues[n] = t;
  }
}

void Parser::check_probes_and_protocol() {
  if (!modality_) return;
  const Modality m = *modality_;
  const ProbeKind want = m == Modality::Rfa   ? ProbeKind::Rfa
                         : m == Modality::Mwa ? ProbeKind::Mwa
                         : m == Modality::Cryo ? ProbeKind::Cryo
                                               : ProbeKind::IreElectrode;
  for (const auto& p : doc_.probes) {
    const std::string scope = "probe:" + p.id;
    if (p.kind != want)
      issue("invalid-value", "kind", scope,
            std::string("probe kind ") + to_string(p.kind) + " does not match modality " + to_string(m));
    if (!p.equipment_id.empty() && !doc_.equipment.count(p.equipment_id))
      issue("unknown-equipment", "equipment", scope, "equipment '" + p.equipment_id + "' is not defined");
    if (have_grid_ && !doc_.grid.contains(p.tip)) issue("invalid-value", "tip", scope, "probe tip outside the grid");
  }
  if (doc_.probes.empty()) issue("missing-parameter", "probe", "scenario", "scenario needs at least one probe");

  auto& proto = doc_.protocol;
  if (doc_.parameters.count("repeat_cap"))
    proto.repeat_cap = static_cast<int>(std::get<long long>(*doc_.parameters["repeat_cap"].value));
  const auto power = doc_.parameters.find("applied_power");
  for (auto& s : proto.steps) {
    const std::string scope = "protocol:" + proto.id + "/step " + std::to_string(s.index);
    const SetpointKind expected = m == Modality::Ire    ? SetpointKind::PotentialDifference
                                  : m == Modality::Cryo ? SetpointKind::Coolant
                                                        : SetpointKind::Power;
    if (s.setpoint != expected)
      issue("invalid-value", "setpoint", scope,
            std::string("setpoint ") + to_string(s.setpoint) + " does not fit modality " + to_string(m));
    if (s.setpoint == SetpointKind::Power && !s.value) {
      if (power != doc_.parameters.end() && power->second.value) s.value = std::get<double>(*power->second.value);
      else issue("missing-parameter", "applied_power", scope, "power step without a value needs applied_power");
    }
    if (s.setpoint == SetpointKind::PotentialDifference) {
      if (!s.anode.empty() && !doc_.probe(s.anode))
        issue("invalid-value", "anode", scope, "anode '" + s.anode + "' is not a probe");
      if (!s.cathode.empty() && !doc_.probe(s.cathode))
        issue("invalid-value", "cathode", scope, "cathode '" + s.cathode + "' is not a probe");
    }
  }
  for (auto& i : proto.validate()) issues_.push_back(std::move(i));
  if (m != Modality::Rfa && m != Modality::Ire && proto.uses_signal(Signal::Impedance) && doc_.impedance_trace.empty())
    issue("missing-parameter", "impedance_trace", "scenario", "impedance guards need a supplied trace for this modality");
  if (!(doc_.real("thermal_dt") > 0.0)) issue("invalid-value", "thermal_dt", "global", "thermal_dt must be positive");
  const double theta = doc_.real("lesion_threshold");
  if (!(theta > 0.0 && theta < 1.0)) issue("invalid-value", "lesion_threshold", "global", "must lie in (0, 1)");
}

std::optional<ScenarioDoc> Parser::run(const std::string& text) {
  const auto tree = xml::parse(text, issues_);
  if (!tree) return std::nullopt;
  const xml::Tree* root = xml::child(*tree, "scenario");
  if (!root) {
    issue("xml", "", "document", "root element must be <scenario>");
    return std::nullopt;
  }
  const auto sv = xml::attr(*root, "schema_version");
  double version = 0;
  if (!sv) issue("schema-version", "schema_version", "scenario", "missing schema_version attribute");
  else if (!parse_double(*sv, version) || version != kScenarioSchemaVersion)
    issue("schema-version", "schema_version", "scenario", "unsupported schema_version '" + *sv + "'");
  doc_.id = xml::attr_or(*root, "id", "");
  if (const auto m = xml::attr(*root, "modality")) {
    modality_ = modality_from_string(*m);
    if (!modality_) issue("unknown-modality", "modality", "scenario", "unknown modality '" + *m + "'");
  }
  if (const xml::Tree* c = xml::child(*root, "composition")) {
    CompositionRef ref;
    ref.library = ctx_.library ? xml::attr_or(*c, "library", "") : resolve(xml::attr_or(*c, "library", "")).string();
    ref.model = xml::attr_or(*c, "model", "");
    ref.equipment = xml::attr_or(*c, "equipment", "");
    ref.organ = xml::attr_or(*c, "organ", "");
    ref.protocol = xml::attr_or(*c, "protocol", "");
    doc_.composition = ref;
  }
  parse_grid(*root);
  parse_regions(*root);
  if (!have_grid_) issue("missing-parameter", "grid", "grid", "scenario needs a <grid> or a region mask");
  parse_probes(*root);
  parse_parameters(*root);
  parse_misc(*root);
  resolve_composition();
  if (!doc_.composition && !inline_protocol_)
    issue("missing-parameter", "protocol", "scenario", "scenario needs a protocol");
  resolve_tissues();
  check_probes_and_protocol();
  if (!issues_.empty()) return std::nullopt;
  return std::move(doc_);
}

}  // namespace

ScenarioParse parse_scenario(const std::string& text, const ParseContext& ctx) {
  ScenarioParse out;
  try {
    Parser parser(ctx, out.issues);
    out.doc = parser.run(text);
  } catch (const std::exception& e) {
    out.issues.push_back({"internal", "", "scenario", e.what()});
    out.doc.reset();
  }
  if (!out.issues.empty()) out.doc.reset();
  return out;
}

ScenarioParse load_scenario(const std::filesystem::path& path) {
  ScenarioParse out;
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    out.issues.push_back({"io", "", path.string(), e.what()});
    return out;
  }
  ParseContext ctx;
  ctx.base_dir = std::filesystem::absolute(path).parent_path();
  return parse_scenario(text, ctx);
}

namespace {

std::string triple(const Vec3& v) {
  return format_double(v[0]) + " " + format_double(v[1]) + " " + format_double(v[2]);
}

}  // namespace

std::string to_xml(const ScenarioDoc& d) {
  using xml::escape;
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<scenario schema_version=\"" + std::to_string(d.schema_version) + "\" id=\"" + escape(d.id) +
         "\" modality=\"" + to_string(d.modality) + "\">\n";
  if (d.composition) {
    const auto& c = *d.composition;
    out += "  <composition library=\"" + escape(c.library) + "\" model=\"" + escape(c.model) + "\" equipment=\"" +
           escape(c.equipment) + "\" organ=\"" + escape(c.organ) + "\" protocol=\"" + escape(c.protocol) + "\"/>\n";
  }
  out += "  <grid dims=\"" + std::to_string(d.grid.dims[0]) + " " + std::to_string(d.grid.dims[1]) + " " +
         std::to_string(d.grid.dims[2]) + "\" spacing=\"" + triple(d.grid.spacing) + "\" origin=\"" +
         triple(d.grid.origin) + "\" unit=\"mm\"/>\n";
  out += "  <regions";
  if (d.mask_file) out += " mask=\"" + escape(*d.mask_file) + "\"";
  out += ">\n";
  for (const auto& r : d.regions) {
    out += "    <region id=\"" + std::to_string(r.id) + "\" name=\"" + escape(r.name) + "\" tissue=\"" +
           escape(r.tissue) + "\" perfusion=\"" + (r.perfusion ? "true" : "false") + "\"";
    if (r.primitives.empty()) {
      out += "/>\n";
      continue;
    }
    out += ">\n";
    for (const auto& prim : r.primitives) {
      if (const auto* s = std::get_if<Sphere>(&prim))
        out += "      <sphere center=\"" + triple(s->center) + "\" radius=\"" + format_double(s->radius) +
               "\" unit=\"mm\"/>\n";
      else {
        const auto& b = std::get<Box>(prim);
        out += "      <box lower=\"" + triple(b.lower) + "\" upper=\"" + triple(b.upper) + "\" unit=\"mm\"/>\n";
      }
    }
    out += "    </region>\n";
  }
  out += "  </regions>\n";
  for (const auto& p : d.probes) {
    out += "  <probe id=\"" + escape(p.id) + "\" kind=\"" + to_string(p.kind) + "\"";
    if (!p.equipment_id.empty()) out += " equipment=\"" + escape(p.equipment_id) + "\"";
    out += " tip=\"" + triple(p.tip) + "\" direction=\"" + triple(p.direction) + "\" unit=\"mm\"/>\n";
  }
  out += "  <parameters>\n";
  for (const auto& [name, p] : d.parameters) out += xml::write_parameter(name, p, 4);
  out += "  </parameters>\n";
  out += xml::write_protocol(d.protocol, 2);
  for (const auto& [id, e] : d.equipment) {
    const std::string body = xml::write_equipment(e, 4);
    out += "  <equipment id=\"" + escape(id) + "\"" + (body.empty() ? "/>\n" : ">\n" + body + "  </equipment>\n");
  }
  if (!d.impedance_trace.empty()) {
    out += "  <impedance_trace>\n";
    for (const auto& t : d.impedance_trace)
      out += "    <point time=\"" + xml::quantity(t.time, Dimension::Time) + "\" value=\"" +
             xml::quantity(t.value, Dimension::Resistance) + "\"/>\n";
    out += "  </impedance_trace>\n";
  }
  std::string fields;
  for (std::size_t i = 0; i < d.outputs.fields.size(); ++i) fields += (i ? " " : "") + d.outputs.fields[i];
  out += "  <outputs snapshot_every=\"" + xml::quantity(d.outputs.snapshot_every, Dimension::Time) + "\" fields=\"" +
         fields + "\"/>\n";
  out += "</scenario>\n";
  return out;
}

}  // namespace mict
