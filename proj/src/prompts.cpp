#include "memflow/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "memflow/assets.hpp"
#include "memflow/error.hpp"
#include "memflow/text.hpp"

namespace memflow {

PromptLibrary PromptLibrary::bundled() {
  PromptLibrary lib;
  for (const auto& [name, body] : assets::table()) {
    if (name.rfind("prompts/", 0) == 0) lib.texts_[name.substr(8)] = std::string(text::trim(body));
  }
  return lib;
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
  auto lib = bundled();
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::ConfigError, "prompt directory not found: " + dir.string());
  for (auto& [name, body] : lib.texts_) {
    auto p = dir / name;
    if (!std::filesystem::exists(p)) continue;
    std::ifstream in(p);
    if (!in) throw Error(Errc::IoError, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    body = std::string(text::trim(ss.str()));
  }
  return lib;
}

const std::string& PromptLibrary::get(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw Error(Errc::ConfigError, "missing prompt asset " + name);
  return it->second;
}

std::string PromptLibrary::answer_system(ActionTag tag) const {
  return get(std::string(to_string(tag)) + ".txt") + "\n\n" + grounding();
}

std::string fill_template(std::string_view tmpl,
                          std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto key = tmpl.substr(i + 1, close - i - 1);
        auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == key; });
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace memflow
