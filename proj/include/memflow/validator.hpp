#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "memflow/action_tag.hpp"
#include "memflow/llm_gateway.hpp"

namespace memflow {

enum class VerdictStage { HardFailure, Passthrough, LlmJudge, OverlapFallback };
std::string_view to_string(VerdictStage s);

struct Verdict {
  bool grounded = false;
  VerdictStage stage = VerdictStage::HardFailure;
  std::optional<std::string> judge_raw;
  std::optional<ChatResponse> judge_call;  // set whenever the judge was invoked
};

struct ValidatorParams {
  double tau_ground = 0.07;
  std::size_t passthrough_words = 6;
  std::size_t judge_context_chars = 6000;
  std::size_t judge_max_new_tokens = 8;
};

inline constexpr int kEscalationRetryCap = 1;

bool detect_hard_failure(std::string_view answer);
bool is_short_passthrough(std::string_view answer, std::size_t max_words = 6);

/// Case-insensitive yes/no prefix after stripping any <think> block.
std::optional<bool> parse_judge_reply(std::string_view reply);

/// Fraction of the answer's content tokens found in the context, against tau.
Verdict overlap_fallback(std::string_view answer, std::string_view context, double tau = 0.07);

class Validator {
 public:
  Validator(std::string system_prompt, std::string user_template, ValidatorParams params = {})
      : system_prompt_(std::move(system_prompt)), user_template_(std::move(user_template)), params_(params) {}

  ChatRequest judge_request(std::string_view question, std::string_view context, std::string_view answer) const;

  /// Gateway failures and unparseable replies fall back to token overlap.
  Verdict grounding_judge(const LlmGateway& gateway, std::string_view question, std::string_view context,
                          std::string_view answer) const;

  /// Hard failure, then passthrough, then the judge. A null gateway skips
  /// straight to the overlap check at stage 3.
  Verdict validate(std::string_view answer, std::string_view context, std::string_view question,
                   const LlmGateway* gateway) const;

  const ValidatorParams& params() const { return params_; }

 private:
  std::string system_prompt_;
  std::string user_template_;
  ValidatorParams params_;
};

/// One-retry re-routing target for a failed pass.
ActionTag escalation_target(ActionTag tag);

}  // namespace memflow
