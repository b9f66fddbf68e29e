#pragma once

#include <algorithm>
#include <sstream>

#include "nncap/contract.hpp"

namespace nncap::test {

inline std::vector<std::string> rule_names(const ContractReport& r, Severity severity) {
  std::vector<std::string> out;
  for (const auto& v : r.violations)
    if (v.severity == severity) out.emplace_back(to_string(v.rule));
  std::sort(out.begin(), out.end());
  return out;
}

// Removes the method `name` (header plus indented body) from class Net.
inline std::string delete_method(const std::string& src, const std::string& name) {
  std::istringstream in(src);
  std::string line, out;
  bool skipping = false;
  while (std::getline(in, line)) {
    if (line.rfind("    def " + name + "(", 0) == 0) {
      skipping = true;
      continue;
    }
    if (skipping && (line.empty() || line.rfind("        ", 0) == 0)) continue;
    skipping = false;
    out += line + "\n";
  }
  return out;
}

}  // namespace nncap::test
