#pragma once

#include <string>
#include <vector>

namespace mict {

// One validation failure. `kind` is a stable machine-readable tag
// ("missing-parameter", "unit-mismatch", ...); `parameter` names the offending
// parameter when there is one; `scope` locates it ("global", "tissue:liver",
// "protocol:rfa-standard/step 0", ...).
struct Issue {
  std::string kind;
  std::string parameter;
  std::string scope;
  std::string message;

  bool operator==(const Issue&) const = default;
};

std::string to_string(const Issue& issue);
std::string to_string(const std::vector<Issue>& issues);

}  // namespace mict
