#include "memflow/validator.hpp"

#include <regex>
#include <set>

#include "memflow/error.hpp"
#include "memflow/prompts.hpp"
#include "memflow/text.hpp"

namespace memflow {

std::string_view to_string(VerdictStage s) {
  switch (s) {
    case VerdictStage::HardFailure: return "hard_failure";
    case VerdictStage::Passthrough: return "passthrough";
    case VerdictStage::LlmJudge: return "llm_judge";
    case VerdictStage::OverlapFallback: return "overlap_fallback";
  }
  return "hard_failure";
}

bool detect_hard_failure(std::string_view answer) {
  static const std::regex kEscalate(R"(escalate[\s_\-]*required)", std::regex::icase);
  static const std::vector<std::string> kNotFound = {"not found", "no information", "cannot find", "couldn't find",
                                                     "i don't know"};
  auto t = text::trim(answer);
  if (t.empty()) return true;
  std::string s(t);
  if (std::regex_search(s, kEscalate)) return true;
  auto lower = text::to_lower(s);
  // Curly apostrophes count as straight ones.
  std::string norm;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (lower.compare(i, 3, "\xE2\x80\x99") == 0) {
      norm += '\'';
      i += 2;
    } else {
      norm += lower[i];
    }
  }
  for (const auto& p : kNotFound) {
    if (norm.find(p) != std::string::npos) return true;
  }
  return false;
}

bool is_short_passthrough(std::string_view answer, std::size_t max_words) {
  static const std::regex kNumeric(R"([-+]?\$?(\d{1,3}(,\d{3})+|\d+)(\.\d+)?%?)");
  auto t = text::trim(answer);
  std::string s(t);
  while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
  auto words = text::split_words(s);
  if (words.empty()) return false;
  if (words.size() <= max_words) return true;
  if (std::regex_match(s, kNumeric)) return true;
  if (words.size() <= 3 && std::regex_match(std::string(words.front()), kNumeric)) return true;
  std::string first = text::to_lower(words.front());
  while (!first.empty() && !std::isalpha(static_cast<unsigned char>(first.back()))) first.pop_back();
  return words.size() == 1 && (first == "yes" || first == "no");
}

std::optional<bool> parse_judge_reply(std::string_view reply) {
  std::string s(reply);
  static const std::regex kThink(R"(<think>[\s\S]*?</think>)");
  s = std::regex_replace(s, kThink, "");
  auto open = s.find("<think>");
  if (open != std::string::npos) s.erase(open);
  std::string t = text::to_lower(text::trim(s));
  while (!t.empty() && !std::isalpha(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
  if (t.starts_with("yes")) return true;
  if (t.starts_with("no")) return false;
  return std::nullopt;
}

Verdict overlap_fallback(std::string_view answer, std::string_view context, double tau) {
  Verdict v;
  v.stage = VerdictStage::OverlapFallback;
  auto a = text::content_tokens(answer);
  if (a.empty()) return v;
  auto ctx_tokens = text::tokenize(context);
  std::set<std::string> ctx(ctx_tokens.begin(), ctx_tokens.end());
  std::size_t hit = 0;
  for (const auto& t : a) hit += ctx.count(t);
  v.grounded = static_cast<double>(hit) / static_cast<double>(a.size()) >= tau;
  return v;
}

ChatRequest Validator::judge_request(std::string_view question, std::string_view context,
                                     std::string_view answer) const {
  ChatRequest req;
  req.system_prompt = system_prompt_;
  req.user_message = fill_template(user_template_, {{"question", question},
                                                    {"context", text::utf8_prefix(context, params_.judge_context_chars)},
                                                    {"answer", answer}});
  req.max_new_tokens = params_.judge_max_new_tokens;
  req.temperature = 0.0;
  return req;
}

Verdict Validator::grounding_judge(const LlmGateway& gateway, std::string_view question, std::string_view context,
                                   std::string_view answer) const {
  ChatResponse resp;
  try {
    resp = gateway.complete(judge_request(question, context, answer));
  } catch (const Error&) {
    return overlap_fallback(answer, context, params_.tau_ground);
  }
  Verdict v;
  auto parsed = parse_judge_reply(resp.text);
  if (parsed) {
    v.grounded = *parsed;
    v.stage = VerdictStage::LlmJudge;
  } else {
    v = overlap_fallback(answer, context, params_.tau_ground);
  }
  v.judge_raw = resp.text;
  v.judge_call = std::move(resp);
  return v;
}

Verdict Validator::validate(std::string_view answer, std::string_view context, std::string_view question,
                            const LlmGateway* gateway) const {
  if (detect_hard_failure(answer)) return Verdict{false, VerdictStage::HardFailure, std::nullopt, std::nullopt};
  if (is_short_passthrough(answer, params_.passthrough_words))
    return Verdict{true, VerdictStage::Passthrough, std::nullopt, std::nullopt};
  if (!gateway) return overlap_fallback(answer, context, params_.tau_ground);
  return grounding_judge(*gateway, question, context, answer);
}

ActionTag escalation_target(ActionTag tag) {
  switch (tag) {
    case ActionTag::ProfileInjection: return ActionTag::TargetedExtraction;
    case ActionTag::TargetedExtraction: return ActionTag::ConflictResolution;
    case ActionTag::TemporalReasoning: return ActionTag::TargetedExtraction;
    case ActionTag::ConflictResolution: return ActionTag::TargetedExtraction;
    case ActionTag::BroadSummarization: return ActionTag::TargetedExtraction;
    case ActionTag::ConstraintValidation: return ActionTag::TargetedExtraction;
    case ActionTag::StateTracking: return ActionTag::ConflictResolution;
  }
  return ActionTag::TargetedExtraction;
}

}  // namespace memflow
