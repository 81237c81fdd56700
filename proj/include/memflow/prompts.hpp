#pragma once

#include <filesystem>
#include <map>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

#include "memflow/action_tag.hpp"

namespace memflow {

inline constexpr int kPromptAssetVersion = 1;

/// Router, answer, validator and judge prompts. Defaults are compiled in from
/// assets/prompts; a directory with files of the same names overrides them.
class PromptLibrary {
 public:
  static PromptLibrary bundled();
  /// Files missing from `dir` keep their bundled text.
  static PromptLibrary with_overrides(const std::filesystem::path& dir);

  const std::string& router() const { return get("router.txt"); }
  const std::string& validator() const { return get("validator.txt"); }
  const std::string& judge() const { return get("judge.txt"); }
  const std::string& validator_user() const { return get("validator_user.txt"); }
  const std::string& judge_user() const { return get("judge_user.txt"); }
  const std::string& grounding() const { return get("grounding.txt"); }
  const std::string& peer_conversation() const { return get("peer_conversation.txt"); }

  /// Tag framing followed by the shared grounding instruction.
  std::string answer_system(ActionTag tag) const;

 private:
  const std::string& get(const std::string& name) const;
  std::map<std::string, std::string> texts_;
};

/// Replaces {name} placeholders in one left-to-right pass; substituted
/// values are never rescanned. Unknown placeholders are left as is.
std::string fill_template(std::string_view tmpl,
                          std::initializer_list<std::pair<std::string_view, std::string_view>> values);

}  // namespace memflow
