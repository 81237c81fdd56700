#pragma once

#include <map>
#include <string>
#include <string_view>

namespace memflow::assets {

/// Text assets compiled in from assets/ (see cmake/EmbedAssets.cmake).
const std::map<std::string, std::string_view, std::less<>>& table();

/// Throws std::out_of_range for unknown names.
inline std::string_view get(std::string_view name) {
  const auto& t = table();
  auto it = t.find(name);
  if (it == t.end()) throw std::out_of_range("unknown asset: " + std::string(name));
  return it->second;
}

}  // namespace memflow::assets
