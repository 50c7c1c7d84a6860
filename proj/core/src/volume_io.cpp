#include "mict/volume_io.hpp"

#include <bit>
#include <cmath>
#include <cctype>
#include <cstring>
#include <map>
#include <sstream>
#include <string_view>

#include "mict/error.hpp"
#include "mict/io_util.hpp"

namespace mict {

static_assert(std::endian::native == std::endian::little, "payload I/O assumes a little-endian host");

const char* to_string(ElementType type) {
  return type == ElementType::UInt8 ? "MET_UCHAR" : "MET_FLOAT";
}

namespace {

std::size_t element_size(ElementType t) { return t == ElementType::UInt8 ? 1 : 4; }

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::MalformedHeader, "volume header: " + what);
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<double> parse_numbers(const std::string& key, const std::string& value, std::size_t expected) {
  std::vector<double> out;
  std::istringstream in(value);
  std::string tok;
  while (in >> tok) {
    double v;
    if (!parse_double(tok, v) || !std::isfinite(v)) malformed(key + " has a non-numeric entry");
    out.push_back(v);
  }
  if (out.size() != expected) malformed(key + " must have " + std::to_string(expected) + " entries");
  return out;
}

struct Header {
  GridSpec grid;
  ElementType type = ElementType::Float32;
  std::string data_file;
};

// Parses header lines from `text`; stops after ElementDataFile (which is last by
// convention). Returns the offset just past that line.
std::size_t parse_header(const std::string& text, Header& h) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  bool have_data_file = false;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    const std::size_t end = eol == std::string::npos ? text.size() : eol;
    const std::string line = trim(std::string_view(text).substr(pos, end - pos));
    pos = eol == std::string::npos ? text.size() : eol + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) malformed("line without '=': " + line.substr(0, 40));
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) malformed("empty key");
    kv[key] = value;
    if (key == "ElementDataFile") {
      have_data_file = true;
      break;
    }
  }
  if (!have_data_file) malformed("missing ElementDataFile");

  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) malformed(std::string("missing ") + key);
    return it->second;
  };
  if (auto it = kv.find("ObjectType"); it != kv.end() && it->second != "Image") malformed("ObjectType must be Image");
  if (get("NDims") != "3") malformed("NDims must be 3");
  if (auto it = kv.find("BinaryDataByteOrderMSB"); it != kv.end() && it->second != "False")
    malformed("big-endian payloads are not supported");
  if (auto it = kv.find("CompressedData"); it != kv.end() && it->second != "False")
    malformed("compressed payloads are not supported");
  if (auto it = kv.find("TransformMatrix"); it != kv.end()) {
    const auto m = parse_numbers("TransformMatrix", it->second, 9);
    const double id[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    for (int i = 0; i < 9; ++i)
      if (std::abs(m[i] - id[i]) > 1e-9) malformed("only axis-aligned volumes are supported");
  }
  const auto dims = parse_numbers("DimSize", get("DimSize"), 3);
  const auto spacing = parse_numbers("ElementSpacing", get("ElementSpacing"), 3);
  std::vector<double> origin{0.0, 0.0, 0.0};
  if (kv.contains("Offset")) origin = parse_numbers("Offset", kv["Offset"], 3);
  else if (kv.contains("Origin")) origin = parse_numbers("Origin", kv["Origin"], 3);
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1 || dims[a] != std::floor(dims[a]) || dims[a] > 1 << 16) malformed("DimSize must be positive integers");
    h.grid.dims[a] = static_cast<int>(dims[a]);
    h.grid.spacing[a] = spacing[a];
    h.grid.origin[a] = origin[a];
  }
  const std::string& et = get("ElementType");
  if (et == "MET_UCHAR") h.type = ElementType::UInt8;
  else if (et == "MET_FLOAT") h.type = ElementType::Float32;
  else throw Error(ErrorCode::UnsupportedElementType, "unsupported ElementType " + et);
  h.data_file = get("ElementDataFile");
  try {
    h.grid.validate();
  } catch (const Error& e) {
    malformed(e.what());
  }
  return pos;
}

std::vector<double> decode_payload(const Header& h, std::string_view payload) {
  const std::size_t n = h.grid.voxel_count();
  const std::size_t expected = n * element_size(h.type);
  if (payload.size() != expected)
    throw Error(ErrorCode::SizeMismatch, "payload has " + std::to_string(payload.size()) + " bytes, header implies " +
                                             std::to_string(expected));
  std::vector<double> values(n);
  if (h.type == ElementType::UInt8) {
    for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<unsigned char>(payload[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, payload.data() + 4 * i, 4);
      values[i] = f;
    }
  }
  return values;
}

std::string encode_payload(const Volume& v) {
  const std::size_t n = v.grid.voxel_count();
  if (v.values.size() != n) throw Error(ErrorCode::SizeMismatch, "volume value count does not match grid");
  std::string out(n * element_size(v.type), '\0');
  if (v.type == ElementType::UInt8) {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = v.values[i];
      if (!(x >= 0.0 && x <= 255.0) || x != std::floor(x))
        throw Error(ErrorCode::InvalidArgument, "uint8 volume value out of range");
      out[i] = static_cast<char>(static_cast<unsigned char>(x));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const float f = static_cast<float>(v.values[i]);
      std::memcpy(out.data() + 4 * i, &f, 4);
    }
  }
  return out;
}

std::string triple(const Vec3& v) { return format_double(v[0]) + " " + format_double(v[1]) + " " + format_double(v[2]); }

}  // namespace

std::string volume_header(const Volume& v, const std::string& data_file) {
  std::string h;
  h += "ObjectType = Image\n";
  h += "NDims = 3\n";
  h += "BinaryData = True\n";
  h += "BinaryDataByteOrderMSB = False\n";
  h += "DimSize = " + std::to_string(v.grid.dims[0]) + " " + std::to_string(v.grid.dims[1]) + " " +
       std::to_string(v.grid.dims[2]) + "\n";
  h += "ElementSpacing = " + triple(v.grid.spacing) + "\n";
  h += "Offset = " + triple(v.grid.origin) + "\n";
  h += std::string("ElementType = ") + to_string(v.type) + "\n";
  h += "ElementDataFile = " + data_file + "\n";
  return h;
}

Volume read_volume(const std::filesystem::path& header_path) {
  const std::string text = read_file(header_path);
  Header h;
  const std::size_t body = parse_header(text, h);
  std::string payload;
  if (h.data_file == "LOCAL") {
    payload = text.substr(body);
  } else {
    auto data_path = std::filesystem::path(h.data_file);
    if (data_path.is_relative()) data_path = header_path.parent_path() / data_path;
    payload = read_file(data_path);
  }
  return Volume{h.grid, h.type, decode_payload(h, payload)};
}

void write_volume(const std::filesystem::path& header_path, const Volume& volume) {
  auto raw = header_path;
  raw.replace_extension(".raw");
  write_file_atomic(raw, encode_payload(volume));
  write_file_atomic(header_path, volume_header(volume, raw.filename().string()));
}

Volume parse_volume_inline(const std::string& bytes) {
  Header h;
  const std::size_t body = parse_header(bytes, h);
  if (h.data_file != "LOCAL") malformed("inline volumes must use ElementDataFile = LOCAL");
  return Volume{h.grid, h.type, decode_payload(h, std::string_view(bytes).substr(body))};
}

std::string serialize_volume_inline(const Volume& volume) {
  return volume_header(volume, "LOCAL") + encode_payload(volume);
}

Volume to_volume(const ScalarField& field) {
  return Volume{field.grid(), ElementType::Float32, std::vector<double>(field.values().begin(), field.values().end())};
}

Volume to_volume(const LabelMask& mask) {
  Volume v{mask.grid(), ElementType::UInt8, {}};
  v.values.assign(mask.labels().begin(), mask.labels().end());
  return v;
}

ScalarField to_field(const Volume& volume, Unit unit) { return ScalarField(volume.grid, unit, volume.values); }

LabelMask to_mask(const Volume& volume, Legend legend) {
  if (volume.type != ElementType::UInt8)
    throw Error(ErrorCode::UnsupportedElementType, "label masks must be stored as MET_UCHAR");
  std::vector<std::uint8_t> labels(volume.values.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<std::uint8_t>(volume.values[i]);
    if (!legend.contains(labels[i])) legend.emplace(labels[i], labels[i] == 0 ? "background" : "region" + std::to_string(labels[i]));
  }
  return LabelMask(volume.grid, std::move(labels), std::move(legend));
}

}  // namespace mict
