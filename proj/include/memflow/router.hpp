#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "memflow/action_tag.hpp"
#include "memflow/llm_gateway.hpp"

namespace memflow {

enum class DecidedBy { Rule, Slm, Heuristic, Fixed };

constexpr std::string_view to_string(DecidedBy d) {
  switch (d) {
    case DecidedBy::Rule: return "rule";
    case DecidedBy::Slm: return "slm";
    case DecidedBy::Heuristic: return "heuristic";
    case DecidedBy::Fixed: return "fixed";
  }
  return "heuristic";
}

struct RouterDecision {
  bool requires_rag = true;
  bool requires_reasoning = false;
  ActionTag action_tag = ActionTag::TargetedExtraction;
  DecidedBy decided_by = DecidedBy::Heuristic;

  bool operator==(const RouterDecision&) const = default;
};

/// Flags implied by the tag: profile-injection needs no retrieval, Tier-3
/// tags always need reasoning.
RouterDecision decision_for(ActionTag tag, DecidedBy by);

/// Fires only when exactly one rule family matches.
std::optional<ActionTag> apply_rules(std::string_view query);

/// Keyword table; defaults to targeted-extraction.
ActionTag keyword_fallback(std::string_view query);

/// Parses a router reply: strict JSON first, then any literal tag name in
/// the text. Returns nothing if neither works.
std::optional<RouterDecision> parse_router_reply(std::string_view reply);

struct RouteResult {
  RouterDecision decision;
  std::optional<ChatResponse> llm_call;  // set whenever the SLM layer was consulted
};

/// Three-layer cascade: rules, then one SLM classification, then keywords.
/// Stateless after construction.
class Router {
 public:
  explicit Router(std::string system_prompt, std::size_t max_new_tokens = 64)
      : system_prompt_(std::move(system_prompt)), max_new_tokens_(max_new_tokens) {}

  ChatRequest classification_request(std::string_view query) const;

  /// Throws Error{ClassificationUnavailable} when the gateway fails.
  /// `call` receives the raw exchange for token accounting.
  std::optional<RouterDecision> classify_llm(std::string_view query, const LlmGateway& gateway,
                                             std::optional<ChatResponse>* call = nullptr) const;

  /// Never fails. A null gateway skips the SLM layer.
  RouteResult route(std::string_view query, const LlmGateway* gateway) const;

 private:
  std::string system_prompt_;
  std::size_t max_new_tokens_;
};

}  // namespace memflow
