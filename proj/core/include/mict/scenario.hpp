#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mict/cdm.hpp"
#include "mict/field.hpp"
#include "mict/tissue.hpp"

namespace mict {

inline constexpr int kScenarioSchemaVersion = 1;

enum class Modality { Rfa, Mwa, Cryo, Ire };

const char* to_string(Modality m);
std::optional<Modality> modality_from_string(std::string_view s);

struct Sphere {
  Vec3 center{0.0, 0.0, 0.0};  // mm
  double radius = 0.0;         // mm
  bool operator==(const Sphere&) const = default;
};

struct Box {
  Vec3 lower{0.0, 0.0, 0.0};  // mm
  Vec3 upper{0.0, 0.0, 0.0};
  bool operator==(const Box&) const = default;
};

using Primitive = std::variant<Sphere, Box>;

// One label of the region mask bound to a tissue. Regions with perfusion off
// (TACE) get a zero perfusion coefficient. Without a mask file the label map is
// painted from the primitives in declaration order over region 0.
struct RegionDef {
  std::uint8_t id = 0;
  std::string name;
  std::string tissue;
  bool perfusion = true;
  std::vector<Primitive> primitives;
  bool operator==(const RegionDef&) const = default;
};

struct CompositionRef {
  std::string library;  // absolute path
  std::string model;
  std::string equipment;
  std::string organ;
  std::string protocol;
  bool operator==(const CompositionRef&) const = default;
};

struct OutputRequest {
  double snapshot_every = 0.0;      // s; 0 disables snapshots
  std::vector<std::string> fields;  // temperature, damage, sar, potential, field
  bool operator==(const OutputRequest&) const = default;
};

struct TracePoint {
  double time = 0.0;   // s
  double value = 0.0;  // ohm
  bool operator==(const TracePoint&) const = default;
};

// A fully resolved simulation definition. All values are SI except geometry,
// which is in mm.
struct ScenarioDoc {
  int schema_version = kScenarioSchemaVersion;
  std::string id;
  Modality modality = Modality::Rfa;
  std::optional<CompositionRef> composition;
  GridSpec grid;
  std::optional<std::string> mask_file;  // absolute path
  std::optional<LabelMask> mask;         // loaded mask_file
  std::vector<RegionDef> regions;
  std::map<std::string, TissueProperties> tissues;
  std::vector<Probe> probes;
  std::map<std::string, Parameter> parameters;  // resolved, registry defaults included
  Protocol protocol;
  std::map<std::string, EquipmentDef> equipment;
  std::vector<TracePoint> impedance_trace;
  OutputRequest outputs;

  double real(const std::string& name) const;  // throws InvalidArgument when absent
  long long integer(const std::string& name) const;
  bool boolean(const std::string& name) const;
  std::string choice(const std::string& name) const;
  bool has(const std::string& name) const { return parameters.count(name) > 0; }

  const RegionDef* region(std::uint8_t id) const;
  const Probe* probe(const std::string& id) const;
  const EquipmentDef* equipment_for(const Probe& p) const;
  // Region labels: the mask file when given, otherwise the painted primitives.
  LabelMask region_mask() const;
  // Impedance trace sampled at t (piecewise linear, clamped at the ends).
  double trace_impedance(double t) const;

  bool operator==(const ScenarioDoc&) const = default;
};

struct ScenarioParse {
  std::optional<ScenarioDoc> doc;
  std::vector<Issue> issues;  // every failure found, in document order
  bool ok() const { return doc.has_value(); }
};

struct ParseContext {
  std::filesystem::path base_dir = ".";   // relative paths resolve here
  const ComponentLibrary* library = nullptr;  // overrides the <composition> library file
};

// Total: returns either a valid document or the complete list of failures.
ScenarioParse parse_scenario(const std::string& text, const ParseContext& ctx = {});
ScenarioParse load_scenario(const std::filesystem::path& path);

// Canonical XML; parse_scenario(to_xml(d)) == d.
std::string to_xml(const ScenarioDoc& doc);

}  // namespace mict
