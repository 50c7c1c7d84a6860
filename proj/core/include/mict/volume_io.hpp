#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mict/field.hpp"

namespace mict {

enum class ElementType { UInt8, Float32 };

const char* to_string(ElementType type);  // MetaImage tag, e.g. "MET_UCHAR"

// A voxel volume as stored on disk. Values are held as doubles; every value of
// the stored element type is represented exactly.
struct Volume {
  GridSpec grid;
  ElementType type = ElementType::Float32;
  std::vector<double> values;

  bool operator==(const Volume&) const = default;
};

// MetaImage (.mhd text header + .raw little-endian payload). Errors are
// reported with distinct codes: MalformedHeader, SizeMismatch,
// UnsupportedElementType, Io.
Volume read_volume(const std::filesystem::path& header_path);
// Writes `<stem>.raw` next to the header, then the header; both atomically.
void write_volume(const std::filesystem::path& header_path, const Volume& volume);

// Single-buffer form with "ElementDataFile = LOCAL": header text immediately
// followed by the payload (the .mha convention). Used for HTTP uploads.
Volume parse_volume_inline(const std::string& bytes);
std::string serialize_volume_inline(const Volume& volume);

// Canonical header text for a given payload file name.
std::string volume_header(const Volume& volume, const std::string& data_file);

Volume to_volume(const ScalarField& field);  // Float32
Volume to_volume(const LabelMask& mask);     // UInt8
ScalarField to_field(const Volume& volume, Unit unit);
// Legend defaults to {id: "region<id>"} for every id present.
LabelMask to_mask(const Volume& volume, Legend legend = {});

}  // namespace mict
