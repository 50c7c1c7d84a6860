#include "xml_util.hpp"

#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "mict/io_util.hpp"
#include "mict/units.hpp"

namespace mict::xml {

namespace pt = boost::property_tree;

std::optional<Tree> parse(const std::string& text, std::vector<Issue>& issues) {
  Tree tree;
  try {
    std::istringstream in(text);
    pt::read_xml(in, tree, pt::xml_parser::no_comments | pt::xml_parser::trim_whitespace);
  } catch (const std::exception& e) {
    issues.push_back({"xml", "", "document", e.what()});
    return std::nullopt;
  }
  return tree;
}

std::optional<std::string> attr(const Tree& node, const char* name) {
  const auto attrs = node.get_child_optional("<xmlattr>");
  if (!attrs) return std::nullopt;
  const auto v = attrs->get_optional<std::string>(pt::path(name, '\0'));
  if (!v) return std::nullopt;
  return *v;
}

std::string attr_or(const Tree& node, const char* name, const std::string& fallback) {
  return attr(node, name).value_or(fallback);
}

std::vector<const Tree*> children(const Tree& node, const char* tag) {
  std::vector<const Tree*> out;
  for (const auto& [key, sub] : node)
    if (key == tag) out.push_back(&sub);
  return out;
}

const Tree* child(const Tree& node, const char* tag) {
  for (const auto& [key, sub] : node)
    if (key == tag) return &sub;
  return nullptr;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return out = true, true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return out = false, true;
  return false;
}

bool parse_triple(const std::string& s, std::array<double, 3>& out) {
  std::istringstream in(s);
  std::string tok;
  int n = 0;
  while (in >> tok) {
    if (n == 3 || !parse_double(tok, out[n]) || !std::isfinite(out[n])) return false;
    ++n;
  }
  return n == 3;
}

namespace {

std::string indent_str(int n) { return std::string(static_cast<std::size_t>(n), ' '); }

}  // namespace

// "<number> <unit>" -> SI value. "inf" is accepted for durations.
std::optional<double> parse_quantity(const std::string& text, Dimension expected, const std::string& field,
                                     const std::string& scope, std::vector<Issue>& issues, bool allow_inf) {
  std::istringstream in(text);
  std::string num, unit;
  in >> num;
  std::getline(in, unit);
  while (!unit.empty() && unit.front() == ' ') unit.erase(unit.begin());
  while (!unit.empty() && unit.back() == ' ') unit.pop_back();
  double v;
  if (allow_inf && num == "inf") {
    v = std::numeric_limits<double>::infinity();
  } else if (!parse_double(num, v) || !std::isfinite(v)) {
    issues.push_back({"invalid-value", field, scope, "'" + text + "' is not a number with a unit"});
    return std::nullopt;
  }
  const auto info = lookup_unit(unit);
  if (!info) {
    issues.push_back({"unknown-unit", field, scope, "unknown unit '" + unit + "'"});
    return std::nullopt;
  }
  if (info->dimension != expected) {
    issues.push_back({"unit-mismatch", field, scope,
                      std::string("expected ") + to_string(expected) + " (" + canonical_unit(expected) + "), got '" +
                          unit + "'"});
    return std::nullopt;
  }
  return v * info->scale;
}

std::string quantity(double si, Dimension d) {
  if (std::isinf(si)) return std::string("inf ") + canonical_unit(d);
  return format_double(si / canonical_scale(d)) + " " + canonical_unit(d);
}


std::optional<Parameter> parse_parameter(const Tree& node, const std::string& scope, std::vector<Issue>& issues,
                                         const std::string& name_prefix) {
  const auto name_attr = attr(node, "name");
  if (!name_attr || name_attr->empty()) {
    issues.push_back({"invalid-value", "", scope, "parameter without a name"});
    return std::nullopt;
  }
  const std::string name = name_prefix + *name_attr;
  const std::string& label = *name_attr;  // scope already names the tissue
  const ParameterSpec* spec = find_parameter_spec(name);
  Parameter p;
  p.name = name;
  const std::size_t before = issues.size();

  if (const auto k = attr(node, "kind")) {
    const auto kind = parameter_kind_from_string(*k);
    if (!kind) issues.push_back({"invalid-value", label, scope, "unknown parameter kind '" + *k + "'"});
    else if (spec && *kind != spec->kind)
      issues.push_back({"invalid-value", label, scope, std::string("parameter is of kind ") + to_string(spec->kind)});
    else p.kind = *kind;
  } else if (spec) {
    p.kind = spec->kind;
  }
  if (spec) p.choices = spec->choices;
  if (const auto c = attr(node, "choices")) {
    std::istringstream in(*c);
    std::string tok;
    p.choices.clear();
    while (std::getline(in, tok, ','))
      if (!tok.empty()) p.choices.push_back(tok);
  }
  if (p.kind == ParameterKind::Enum && p.choices.empty())
    issues.push_back({"invalid-value", label, scope, "enum parameter without choices"});

  double scale = 1.0;
  if (p.kind == ParameterKind::Real) {
    const std::string unit = attr_or(node, "unit", "");
    const auto info = lookup_unit(unit);
    const Dimension expected = spec ? spec->dimension : (info ? info->dimension : Dimension::Dimensionless);
    if (!info) {
      issues.push_back({"unknown-unit", label, scope, "unknown unit '" + unit + "'"});
    } else if (info->dimension != expected) {
      issues.push_back({"unit-mismatch", label, scope,
                        std::string("expected ") + to_string(expected) + " (" + canonical_unit(expected) + "), got '" +
                            unit + "'"});
    } else {
      scale = info->scale;
    }
    p.dimension = expected;
  }

  bool flag = false;
  if (const auto s = attr(node, "prompt")) {
    if (!parse_bool(*s, flag)) issues.push_back({"invalid-value", label, scope, "prompt must be a boolean"});
    p.prompt = flag;
  }
  if (const auto s = attr(node, "overridable")) {
    if (!parse_bool(*s, flag)) issues.push_back({"invalid-value", label, scope, "overridable must be a boolean"});
    p.overridable = flag;
  }

  if (const auto raw = attr(node, "value")) {
    switch (p.kind) {
      case ParameterKind::Real: {
        double v;
        if (!parse_double(*raw, v) || !std::isfinite(v))
          issues.push_back({"invalid-value", label, scope, "'" + *raw + "' is not a finite number"});
        else p.value = v * scale;
        break;
      }
      case ParameterKind::Integer: {
        double v;
        if (!parse_double(*raw, v) || v != std::floor(v) || std::abs(v) > 9e15)
          issues.push_back({"invalid-value", label, scope, "'" + *raw + "' is not an integer"});
        else p.value = static_cast<long long>(v);
        break;
      }
      case ParameterKind::Boolean: {
        bool b;
        if (!parse_bool(*raw, b)) issues.push_back({"invalid-value", label, scope, "'" + *raw + "' is not a boolean"});
        else p.value = b;
        break;
      }
      case ParameterKind::Enum:
        if (std::find(p.choices.begin(), p.choices.end(), *raw) == p.choices.end())
          issues.push_back({"invalid-value", label, scope, "'" + *raw + "' is not one of the allowed choices"});
        else p.value = *raw;
        break;
    }
  }
  if (issues.size() != before) return std::nullopt;
  return p;
}

std::string write_parameter(const std::string& name, const Parameter& p, int indent) {
  std::string out = indent_str(indent) + "<parameter name=\"" + escape(name) + "\"";
  const ParameterSpec* spec = find_parameter_spec(p.name);
  if (!spec || spec->kind != p.kind) out += std::string(" kind=\"") + to_string(p.kind) + "\"";
  if (p.kind == ParameterKind::Enum && (!spec || spec->choices != p.choices)) {
    std::string joined;
    for (std::size_t i = 0; i < p.choices.size(); ++i) joined += (i ? "," : "") + p.choices[i];
    out += " choices=\"" + escape(joined) + "\"";
  }
  if (p.value) out += " value=\"" + escape(format_value(*p.value, p.dimension)) + "\"";
  if (p.kind == ParameterKind::Real) out += std::string(" unit=\"") + escape(canonical_unit(p.dimension)) + "\"";
  if (p.prompt) out += " prompt=\"true\"";
  if (p.overridable) out += " overridable=\"true\"";
  out += "/>\n";
  return out;
}

std::optional<Protocol> parse_protocol(const Tree& node, std::vector<Issue>& issues) {
  Protocol p;
  p.id = attr_or(node, "id", "");
  const std::string scope = "protocol:" + p.id;
  const std::size_t before = issues.size();
  if (const auto rc = attr(node, "repeat_cap")) {
    double v;
    if (!parse_double(*rc, v) || v != std::floor(v) || v < 0 || v > 1e6)
      issues.push_back({"invalid-value", "repeat_cap", scope, "repeat_cap must be a non-negative integer"});
    else p.repeat_cap = static_cast<int>(v);
  }
  int index = 0;
  for (const Tree* st : children(node, "step")) {
    ProtocolStep step;
    step.index = index;
    const std::string sscope = scope + "/step " + std::to_string(index);
    const std::string kind = attr_or(*st, "setpoint", "power");
    const auto sk = setpoint_kind_from_string(kind);
    if (!sk) {
      issues.push_back({"invalid-value", "setpoint", sscope, "unknown setpoint kind '" + kind + "'"});
    } else {
      step.setpoint = *sk;
      if (const auto v = attr(*st, "value")) {
        if (step.setpoint == SetpointKind::Coolant) {
          bool on;
          if (!parse_bool(*v, on)) issues.push_back({"invalid-value", "value", sscope, "coolant value must be on/off"});
          else step.value = on ? 1.0 : 0.0;
        } else {
          const Dimension d = step.setpoint == SetpointKind::Power ? Dimension::Power : Dimension::Voltage;
          step.value = parse_quantity(*v, d, "value", sscope, issues);
        }
      }
    }
    step.anode = attr_or(*st, "anode", "");
    step.cathode = attr_or(*st, "cathode", "");
    if (const auto d = attr(*st, "max_duration")) {
      if (auto v = parse_quantity(*d, Dimension::Time, "max_duration", sscope, issues, true)) step.max_duration = *v;
    } else {
      issues.push_back({"missing-parameter", "max_duration", sscope, "step needs a max_duration"});
    }
    for (const Tree* gn : children(*st, "guard")) {
      Guard g;
      const auto sig = signal_from_string(attr_or(*gn, "signal", ""));
      const auto cmp = comparator_from_string(attr_or(*gn, "comparator", "ge"));
      const auto act = guard_action_from_string(attr_or(*gn, "action", "advance"));
      if (!sig || !cmp || !act) {
        issues.push_back({"invalid-value", "guard", sscope, "guard needs a known signal, comparator and action"});
        continue;
      }
      g.signal = *sig;
      g.comparator = *cmp;
      g.action = *act;
      const Dimension d = g.signal == Signal::ElapsedTime        ? Dimension::Time
                          : g.signal == Signal::ProbeTemperature ? Dimension::Temperature
                                                                 : Dimension::Resistance;
      if (auto v = parse_quantity(attr_or(*gn, "threshold", ""), d, "threshold", sscope, issues)) g.threshold = *v;
      if (g.action == GuardAction::SetPower) {
        if (auto v = parse_quantity(attr_or(*gn, "power", ""), Dimension::Power, "power", sscope, issues)) g.value = *v;
      } else if (g.action == GuardAction::RepeatStep) {
        if (const auto s = attr(*gn, "scale")) {
          double v;
          if (!parse_double(*s, v) || !(v > 0.0) || !std::isfinite(v))
            issues.push_back({"invalid-value", "scale", sscope, "repeat scale must be a positive number"});
          else g.value = v;
        }
      }
      step.guards.push_back(g);
    }
    p.steps.push_back(std::move(step));
    ++index;
  }
  if (issues.size() != before) return std::nullopt;
  return p;
}

std::string write_protocol(const Protocol& p, int indent) {
  const std::string in0 = indent_str(indent), in1 = indent_str(indent + 2), in2 = indent_str(indent + 4);
  std::string out = in0 + "<protocol id=\"" + escape(p.id) + "\" repeat_cap=\"" + std::to_string(p.repeat_cap) + "\">\n";
  for (const auto& s : p.steps) {
    out += in1 + "<step setpoint=\"" + to_string(s.setpoint) + "\"";
    if (s.value) {
      if (s.setpoint == SetpointKind::Coolant) out += std::string(" value=\"") + (*s.value != 0.0 ? "on" : "off") + "\"";
      else
        out += " value=\"" +
               quantity(*s.value, s.setpoint == SetpointKind::Power ? Dimension::Power : Dimension::Voltage) + "\"";
    }
    if (!s.anode.empty()) out += " anode=\"" + escape(s.anode) + "\"";
    if (!s.cathode.empty()) out += " cathode=\"" + escape(s.cathode) + "\"";
    out += " max_duration=\"" + quantity(s.max_duration, Dimension::Time) + "\"";
    if (s.guards.empty()) {
      out += "/>\n";
      continue;
    }
    out += ">\n";
    for (const auto& g : s.guards) {
      const Dimension d = g.signal == Signal::ElapsedTime        ? Dimension::Time
                          : g.signal == Signal::ProbeTemperature ? Dimension::Temperature
                                                                 : Dimension::Resistance;
      out += in2 + "<guard signal=\"" + to_string(g.signal) + "\" comparator=\"" + to_string(g.comparator) +
             "\" threshold=\"" + quantity(g.threshold, d) + "\" action=\"" + to_string(g.action) + "\"";
      if (g.action == GuardAction::SetPower) out += " power=\"" + quantity(g.value, Dimension::Power) + "\"";
      if (g.action == GuardAction::RepeatStep) out += " scale=\"" + format_double(g.value) + "\"";
      out += "/>\n";
    }
    out += in1 + "</step>\n";
  }
  out += in0 + "</protocol>\n";
  return out;
}

std::optional<EquipmentDef> parse_equipment(const Tree& node, const std::string& id, std::vector<Issue>& issues) {
  EquipmentDef e;
  e.id = id;
  const std::string scope = "equipment:" + id;
  const std::size_t before = issues.size();
  for (const Tree* t : children(node, "tine")) {
    TinePoint tp;
    if (auto v = parse_quantity(attr_or(*t, "axial", "0 mm"), Dimension::Length, "axial", scope, issues)) tp.axial = *v * 1e3;
    if (auto v = parse_quantity(attr_or(*t, "radial", "0 mm"), Dimension::Length, "radial", scope, issues)) tp.radial = *v * 1e3;
    double a = 0.0, w = 1.0;
    if (const auto s = attr(*t, "angle"); s && (!parse_double(*s, a) || !std::isfinite(a)))
      issues.push_back({"invalid-value", "angle", scope, "tine angle must be a number (degrees)"});
    if (const auto s = attr(*t, "weight"); s && (!parse_double(*s, w) || !(w > 0.0)))
      issues.push_back({"invalid-value", "weight", scope, "tine weight must be positive"});
    tp.angle_deg = a;
    tp.weight = w;
    e.tines.push_back(tp);
  }
  for (const Tree* t : children(node, "em_table")) {
    const std::string tissue = attr_or(*t, "tissue", "");
    if (tissue.empty()) {
      issues.push_back({"invalid-value", "em_table", scope, "em_table needs a tissue"});
      continue;
    }
    EmTable table;
    for (const Tree* pnode : children(*t, "point")) {
      EmPoint pt;
      if (auto v = parse_quantity(attr_or(*pnode, "temperature", ""), Dimension::Temperature, "temperature", scope, issues))
        pt.temperature = *v;
      double eps;
      if (!parse_double(attr_or(*pnode, "permittivity", ""), eps) || !(eps > 0.0))
        issues.push_back({"invalid-value", "permittivity", scope, "permittivity must be positive"});
      else pt.permittivity = eps;
      if (auto v = parse_quantity(attr_or(*pnode, "conductivity", ""), Dimension::ElectricalConductivity, "conductivity",
                                  scope, issues))
        pt.conductivity = *v;
      table.push_back(pt);
    }
    if (table.empty()) issues.push_back({"invalid-value", "em_table", scope, "em_table for " + tissue + " is empty"});
    for (std::size_t i = 1; i < table.size(); ++i)
      if (!(table[i].temperature > table[i - 1].temperature))
        issues.push_back({"invalid-value", "em_table", scope, "em_table temperatures must increase"});
    e.em_tables[tissue] = std::move(table);
  }
  if (issues.size() != before) return std::nullopt;
  return e;
}

std::string write_equipment(const EquipmentDef& e, int indent) {
  const std::string in0 = indent_str(indent), in1 = indent_str(indent + 2), in2 = indent_str(indent + 4);
  std::string out;
  for (const auto& t : e.tines)
    out += in0 + "<tine axial=\"" + format_double(t.axial) + " mm\" radial=\"" + format_double(t.radial) +
           " mm\" angle=\"" + format_double(t.angle_deg) + "\" weight=\"" + format_double(t.weight) + "\"/>\n";
  for (const auto& [tissue, table] : e.em_tables) {
    out += in0 + "<em_table tissue=\"" + escape(tissue) + "\">\n";
    for (const auto& p : table)
      out += in1 + "<point temperature=\"" + format_double(p.temperature) + " K\" permittivity=\"" +
             format_double(p.permittivity) + "\" conductivity=\"" + format_double(p.conductivity) + " S/m\"/>\n";
    out += in0 + "</em_table>\n";
  }
  (void)in2;
  return out;
}

}  // namespace mict::xml
