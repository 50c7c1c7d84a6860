#include "mict/diagnostics.hpp"

namespace mict {

std::string to_string(const Issue& issue) {
  std::string out = issue.kind;
  if (!issue.scope.empty()) out += " [" + issue.scope + "]";
  if (!issue.parameter.empty()) out += " " + issue.parameter;
  if (!issue.message.empty()) out += ": " + issue.message;
  return out;
}

std::string to_string(const std::vector<Issue>& issues) {
  std::string out;
  for (const auto& i : issues) out += to_string(i) + "\n";
  return out;
}

}  // namespace mict
