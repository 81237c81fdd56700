#include "memflow/answer.hpp"

#include "memflow/error.hpp"
#include "memflow/text.hpp"

namespace memflow {

bool tool_mode_for(ActionTag tag) {
  return tag == ActionTag::TemporalReasoning || tag == ActionTag::BroadSummarization;
}

PromptTemplate make_template(const PromptLibrary& prompts, ActionTag tag, StoreFlavor flavor) {
  PromptTemplate t;
  t.tag = tag;
  t.tool_mode = tool_mode_for(tag);
  t.system_text = prompts.answer_system(tag);
  if (flavor == StoreFlavor::PeerConversation) {
    t.system_text = prompts.peer_conversation() + "\n\n" + t.system_text;
    t.overrides.emplace_back("peer-conversation");
  }
  return t;
}

std::string render_user_message(std::string_view packed, std::string_view query) {
  return "Context:\n" + std::string(packed) + "\n\nQuestion: " + std::string(query) + "\nAnswer:";
}

ChatRequest render_prompt(const PromptLibrary& prompts, ActionTag tag, std::string_view packed,
                          std::string_view query, StoreFlavor flavor, std::size_t max_new_tokens) {
  ChatRequest req;
  req.system_prompt = make_template(prompts, tag, flavor).system_text;
  req.user_message = render_user_message(packed, query);
  req.max_new_tokens = max_new_tokens;
  req.temperature = 0.0;
  return req;
}

AnswerDraft generate(const LlmGateway& gateway, const ChatRequest& request, std::string_view packed, ActionTag tag,
                     bool tools_enabled) {
  AnswerDraft draft;
  const bool tool_mode = tools_enabled && tool_mode_for(tag);
  ChatRequest req = request;
  std::string reply;
  try {
    auto first = gateway.complete(req);
    ++draft.gateway_calls;
    draft.prompt_tokens = first.prompt_tokens;
    draft.completion_tokens = first.completion_tokens;
    draft.wrapper_tokens += first.wrapper_tokens;
    reply = first.text;

    while (tool_mode && draft.tool_rounds_used < kMaxToolRounds) {
      auto call = parse_tool_call(reply);
      if (!call) break;
      auto result = execute_tool(*call, packed);
      // Anything after the tool line is discarded for this round.
      auto cut = end_of_tool_line(reply).value_or(reply.size());
      req.prior.push_back({"user", req.user_message});
      req.prior.push_back({"assistant", std::string(text::trim(std::string_view(reply).substr(0, cut)))});
      req.user_message = result.rendered;
      draft.tool_calls.push_back(std::move(result));
      ++draft.tool_rounds_used;

      auto next = gateway.complete(req);
      ++draft.gateway_calls;
      draft.tool_prompt_tokens += next.prompt_tokens;
      draft.tool_completion_tokens += next.completion_tokens;
      draft.wrapper_tokens += next.wrapper_tokens;
      reply = next.text;
    }
  } catch (const Error&) {
    draft.gateway_error = true;
    draft.text = std::string(kEscalateLiteral);
    return draft;
  }
  draft.text = tool_mode || !tools_enabled ? strip_tool_lines(reply) : std::string(text::trim(reply));
  return draft;
}

}  // namespace memflow
