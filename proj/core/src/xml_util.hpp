#pragma once

// Internal XML helpers over boost::property_tree.

#include <boost/property_tree/ptree.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mict/cdm.hpp"
#include "mict/diagnostics.hpp"

namespace mict::xml {

using Tree = boost::property_tree::ptree;

// Parses text into a tree; appends an "xml" issue and returns nullopt on error.
std::optional<Tree> parse(const std::string& text, std::vector<Issue>& issues);

std::optional<std::string> attr(const Tree& node, const char* name);
std::string attr_or(const Tree& node, const char* name, const std::string& fallback);

// Child elements with the given tag, in document order.
std::vector<const Tree*> children(const Tree& node, const char* tag);
const Tree* child(const Tree& node, const char* tag);

std::string escape(const std::string& s);

bool parse_bool(const std::string& s, bool& out);
bool parse_triple(const std::string& s, std::array<double, 3>& out);

// "<number> <unit>" converted to SI; appends an issue on failure. "inf" is
// accepted when allow_inf is set.
std::optional<double> parse_quantity(const std::string& text, Dimension expected, const std::string& field,
                                     const std::string& scope, std::vector<Issue>& issues, bool allow_inf = false);
// SI value written in the canonical unit of d.
std::string quantity(double si, Dimension d);

// <parameter name kind unit value prompt overridable choices/>, validated
// against the registry when the name is known there.
std::optional<Parameter> parse_parameter(const Tree& node, const std::string& scope, std::vector<Issue>& issues,
                                         const std::string& name_prefix = "");
std::string write_parameter(const std::string& name, const Parameter& p, int indent);

std::optional<Protocol> parse_protocol(const Tree& node, std::vector<Issue>& issues);
std::string write_protocol(const Protocol& p, int indent);

std::optional<EquipmentDef> parse_equipment(const Tree& node, const std::string& id, std::vector<Issue>& issues);
std::string write_equipment(const EquipmentDef& e, int indent);

}  // namespace mict::xml
