#include "memflow/router.hpp"

#include <regex>
#include <vector>

#include <nlohmann/json.hpp>

#include "memflow/error.hpp"
#include "memflow/text.hpp"

namespace memflow {

namespace {

struct RuleFamily {
  ActionTag tag;
  std::vector<std::regex> patterns;
};

std::regex ci(const char* pattern) { return std::regex(pattern, std::regex::icase | std::regex::ECMAScript); }

const std::vector<RuleFamily>& rule_families() {
  static const std::vector<RuleFamily> kFamilies = [] {
    std::vector<RuleFamily> f;
    f.push_back({ActionTag::TemporalReasoning,
                 {ci(R"(\bhow (many|much) (days|weeks|months|years|time)\b.*\b(between|since|passed|elapsed|before|after|ago|until)\b)"),
                  ci(R"(\bhow long (ago|since|before|after|between)\b)"),
                  ci(R"(\bwhich\b.*\b(came|happened|did i do|was) (first|earlier|later|last)\b)")}});
    // Duration of a single event is one recalled fact, not a comparison.
    f.push_back({ActionTag::TargetedExtraction,
                 {ci(R"(^\s*how long (was|were|did|have|had) (i|we)\b(?!.*\b(between|since|ago|before|after)\b))")}});
    f.push_back({ActionTag::ConflictResolution,
                 {ci(R"(\b(current|currently|latest|most recent|most recently|newest|up-to-date|right now|these days)\b)")}});
    f.push_back({ActionTag::BroadSummarization,
                 {ci(R"(\bhow many (?!(days|weeks|months|years|hours|minutes|seconds)\b)[a-z])"),
                  ci(R"(\blist (all|every)\b)"), ci(R"(\bhow often\b)"), ci(R"(\bin total\b)")}});
    f.push_back({ActionTag::ConstraintValidation,
                 {ci(R"(\b(always|never|allowed|must|forbidden|permitted|policy|policies|rule|rules)\b)"),
                  ci(R"(\bwhat should (i|we) do (when|if)\b)"), ci(R"(\b(am i|are we) supposed to\b)")}});
    f.push_back({ActionTag::StateTracking,
                 {ci(R"(\bhow (has|have|did)\b.*\b(change|changed|evolve|evolved|progress|progressed|develop|developed|shift|shifted)\b)"),
                  ci(R"(\bover time\b)")}});
    f.push_back({ActionTag::ProfileInjection,
                 {ci(R"(\b(any tips|tips for|tips on|recommend|recommendations?|suggest|suggestions?|ideas for|advice on|draft|write me|help me (write|plan|choose|pick))\b)")}});
    return f;
  }();
  return kFamilies;
}

struct KeywordRow {
  ActionTag tag;
  std::vector<std::string_view> keywords;
};

const std::vector<KeywordRow>& keyword_table() {
  static const std::vector<KeywordRow> kTable = {
      {ActionTag::StateTracking, {"changed", "evolved", "evolve", "progression", "over time"}},
      {ActionTag::ConstraintValidation, {"rule", "rules", "policy", "allowed", "always", "never", "must"}},
      {ActionTag::ConflictResolution, {"current", "currently", "latest", "now", "recent", "recently"}},
      {ActionTag::TemporalReasoning, {"first", "before", "after", "when", "how long", "ago", "date"}},
      {ActionTag::BroadSummarization, {"how many", "list all", "count", "total", "how often", "all the"}},
      {ActionTag::ProfileInjection, {"recommend", "draft", "suggest", "tips", "advice"}},
  };
  return kTable;
}

std::string strip_think(std::string_view s) {
  std::string out(s);
  for (;;) {
    auto open = out.find("<think>");
    if (open == std::string::npos) break;
    auto close = out.find("</think>", open);
    out.erase(open, close == std::string::npos ? std::string::npos : close + 8 - open);
  }
  return out;
}

}  // namespace

RouterDecision decision_for(ActionTag tag, DecidedBy by) {
  RouterDecision d;
  d.action_tag = tag;
  d.decided_by = by;
  d.requires_rag = tag != ActionTag::ProfileInjection;
  d.requires_reasoning = tier_of(tag) == Tier::DeepReasoning;
  return d;
}

std::optional<ActionTag> apply_rules(std::string_view query) {
  const std::string q(query);
  std::optional<ActionTag> hit;
  int families = 0;
  for (const auto& family : rule_families()) {
    for (const auto& re : family.patterns) {
      if (std::regex_search(q, re)) {
        ++families;
        hit = family.tag;
        break;
      }
    }
  }
  if (families != 1) return std::nullopt;
  return hit;
}

ActionTag keyword_fallback(std::string_view query) {
  for (const auto& row : keyword_table()) {
    for (auto kw : row.keywords) {
      if (text::contains_bounded(query, kw)) return row.tag;
    }
  }
  return ActionTag::TargetedExtraction;
}

std::optional<RouterDecision> parse_router_reply(std::string_view reply) {
  auto cleaned = strip_think(reply);
  auto open = cleaned.find('{');
  auto close = cleaned.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    auto j = nlohmann::json::parse(cleaned.substr(open, close - open + 1), nullptr, false);
    if (j.is_object() && j.contains("action_tag") && j["action_tag"].is_string()) {
      if (auto tag = parse_action_tag(text::to_lower(text::trim(j["action_tag"].get<std::string>())))) {
        auto d = decision_for(*tag, DecidedBy::Slm);
        // Model-supplied flags are kept only where the tag leaves them open.
        if (*tag == ActionTag::TargetedExtraction && j.contains("requires_reasoning") &&
            j["requires_reasoning"].is_boolean())
          d.requires_reasoning = j["requires_reasoning"].get<bool>();
        return d;
      }
    }
  }

  static const std::regex rescue(
      R"(profile[-_ ]injection|targeted[-_ ]extraction|temporal[-_ ]reasoning|conflict[-_ ]resolution|broad[-_ ]summarization|constraint[-_ ]validation|state[-_ ]tracking)",
      std::regex::icase);
  std::smatch m;
  if (std::regex_search(cleaned, m, rescue)) {
    auto name = text::to_lower(m.str());
    for (auto& c : name) {
      if (c == '_' || c == ' ') c = '-';
    }
    if (auto tag = parse_action_tag(name)) return decision_for(*tag, DecidedBy::Slm);
  }
  return std::nullopt;
}

ChatRequest Router::classification_request(std::string_view query) const {
  ChatRequest req;
  req.system_prompt = system_prompt_;
  req.user_message = std::string(query);
  req.max_new_tokens = max_new_tokens_;
  req.temperature = 0.0;
  return req;
}

std::optional<RouterDecision> Router::classify_llm(std::string_view query, const LlmGateway& gateway,
                                                   std::optional<ChatResponse>* call) const {
  ChatResponse res;
  try {
    res = gateway.complete(classification_request(query));
  } catch (const std::exception& e) {
    throw Error(Errc::ClassificationUnavailable, e.what());
  }
  if (call) *call = res;
  return parse_router_reply(res.text);
}

RouteResult Router::route(std::string_view query, const LlmGateway* gateway) const {
  RouteResult out;
  if (auto tag = apply_rules(query)) {
    out.decision = decision_for(*tag, DecidedBy::Rule);
    return out;
  }
  if (gateway) {
    try {
      if (auto d = classify_llm(query, *gateway, &out.llm_call)) {
        out.decision = *d;
        return out;
      }
    } catch (const Error&) {
      // degrade to the keyword layer
    }
  }
  out.decision = decision_for(keyword_fallback(query), DecidedBy::Heuristic);
  return out;
}

}  // namespace memflow
