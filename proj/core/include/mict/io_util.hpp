#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mict {

// Shortest decimal representation that round-trips exactly.
std::string format_double(double v);
bool parse_double(std::string_view s, double& out);

std::string read_file(const std::filesystem::path& path);
// Writes to a temporary sibling, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace mict
