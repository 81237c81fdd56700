#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "memflow/action_tag.hpp"
#include "memflow/llm_gateway.hpp"
#include "memflow/prompts.hpp"
#include "memflow/tier_exec.hpp"
#include "memflow/tools.hpp"

namespace memflow {

inline constexpr std::size_t kMaxToolRounds = 3;
inline constexpr std::string_view kEscalateLiteral = "ESCALATE_REQUIRED";

struct PromptTemplate {
  ActionTag tag = ActionTag::TargetedExtraction;
  std::string system_text;
  bool tool_mode = false;
  std::vector<std::string> overrides;  // names of applied prefixes
};

/// Only temporal and summarization questions may call tools.
bool tool_mode_for(ActionTag tag);

PromptTemplate make_template(const PromptLibrary& prompts, ActionTag tag, StoreFlavor flavor);

std::string render_user_message(std::string_view packed, std::string_view query);

ChatRequest render_prompt(const PromptLibrary& prompts, ActionTag tag, std::string_view packed,
                          std::string_view query, StoreFlavor flavor, std::size_t max_new_tokens = 256);

struct AnswerDraft {
  std::string text;
  std::size_t tool_rounds_used = 0;
  std::vector<ToolResult> tool_calls;
  std::size_t prompt_tokens = 0;      // first call
  std::size_t completion_tokens = 0;  // first call
  std::size_t wrapper_tokens = 0;     // all calls
  std::size_t tool_prompt_tokens = 0;  // continuation rounds
  std::size_t tool_completion_tokens = 0;
  std::size_t gateway_calls = 0;
  bool gateway_error = false;
};

/// One answer call plus at most three tool continuations. With tools
/// disabled, TOOL lines are removed from the reply instead of executed.
AnswerDraft generate(const LlmGateway& gateway, const ChatRequest& request, std::string_view packed, ActionTag tag,
                     bool tools_enabled = true);

}  // namespace memflow
