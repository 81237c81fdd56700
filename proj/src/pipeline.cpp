#include "memflow/pipeline.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "memflow/error.hpp"
#include "memflow/text.hpp"

namespace memflow {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 5> kStages = {"router", "answer", "validator", "escalation_answer", "tools"};

struct AblationName {
  std::string_view name;
  bool Ablations::*flag;
};
constexpr std::array<AblationName, 6> kAblationNames = {{
    {"uniform_rag", &Ablations::uniform_rag},
    {"no_router", &Ablations::no_router},
    {"no_tools", &Ablations::no_tools},
    {"no_validator", &Ablations::no_validator},
    {"no_packer", &Ablations::no_packer},
    {"no_retrieval_strategy", &Ablations::no_retrieval_strategy},
}};

StageTrace& stage_ref(PipelineResult& r, std::string_view name) {
  for (auto& s : r.stage_traces) {
    if (s.stage == name) return s;
  }
  throw std::out_of_range("unknown stage " + std::string(name));
}

void charge(StageTrace& s, std::size_t prompt, std::size_t completion, std::size_t calls) {
  if (calls == 0) return;
  s.invoked = true;
  s.prompt_tokens += prompt;
  s.completion_tokens += completion;
  s.calls += calls;
}

}  // namespace

std::vector<std::string> Ablations::names() const {
  std::vector<std::string> out;
  for (const auto& a : kAblationNames) {
    if (this->*a.flag) out.emplace_back(a.name);
  }
  return out;
}

Ablations Ablations::parse(std::string_view list) {
  Ablations a;
  for (const auto& raw : text::split(list, ',')) {
    auto name = text::trim(raw);
    if (name.empty() || name == "none") continue;
    auto it = std::find_if(kAblationNames.begin(), kAblationNames.end(),
                           [&](const AblationName& n) { return n.name == name; });
    if (it == kAblationNames.end()) throw Error(Errc::ConfigError, "unknown ablation '" + std::string(name) + "'");
    a.*(it->flag) = true;
  }
  return a;
}

const StageTrace& PipelineResult::stage(std::string_view name) const {
  for (const auto& s : stage_traces) {
    if (s.stage == name) return s;
  }
  throw std::out_of_range("unknown stage " + std::string(name));
}

json to_json(const PipelineResult& r) {
  json stages = json::array();
  for (const auto& s : r.stage_traces) {
    stages.push_back({{"stage", s.stage},
                      {"prompt_tokens", s.prompt_tokens},
                      {"completion_tokens", s.completion_tokens},
                      {"invoked", s.invoked},
                      {"calls", s.calls}});
  }
  json passes = json::array();
  for (const auto& p : r.passes) {
    passes.push_back({{"tag", to_string(p.tag)},
                      {"packed_tokens", p.packed_tokens},
                      {"included", p.included},
                      {"dropped", p.dropped},
                      {"answer", p.answer},
                      {"grounded", p.grounded},
                      {"verdict_stage", p.verdict_stage ? json(to_string(*p.verdict_stage)) : json(nullptr)},
                      {"tool_rounds", p.tool_rounds},
                      {"tool_calls", p.tool_calls}});
  }
  return {{"answer", r.answer},
          {"action_tag", to_string(r.action_tag)},
          {"decided_by", to_string(r.decided_by)},
          {"is_escalated", r.is_escalated},
          {"escalation_triggered", r.escalation_triggered},
          {"short_circuited", r.short_circuited},
          {"packed_tokens", r.packed_tokens},
          {"slm_call_count", r.slm_call_count},
          {"stage_slm_calls", r.stage_slm_calls},
          {"escalation_judge_calls", r.escalation_judge_calls},
          {"tool_continuations", r.tool_continuations},
          {"total_tokens", r.total_tokens},
          {"fixed_wrapper_tokens", r.fixed_wrapper_tokens},
          {"stage_traces", stages},
          {"passes", passes}};
}

std::vector<const Turn*> flatten_turns(const ConversationHistory& h) {
  std::vector<const Turn*> out;
  for (const auto& s : h.sessions) {
    for (const auto& t : s.turns) out.push_back(&t);
  }
  return out;
}

std::optional<ActiveSpan> active_context_check(std::string_view query, const ConversationHistory& history,
                                               std::size_t window, double threshold, std::size_t span_turns) {
  auto q = text::content_tokens(query);
  if (q.empty() || span_turns == 0) return std::nullopt;
  auto all = flatten_turns(history);
  const std::size_t n = std::min(window, all.size());
  if (n == 0) return std::nullopt;
  std::vector<const Turn*> turns(all.end() - static_cast<std::ptrdiff_t>(n), all.end());

  std::vector<std::set<std::string>> hits(n);
  std::set<std::string> covered;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& t : text::tokenize(turns[i]->text)) {
      if (q.contains(t)) hits[i].insert(t);
    }
    covered.insert(hits[i].begin(), hits[i].end());
  }
  const double overlap = static_cast<double>(covered.size()) / static_cast<double>(q.size());
  if (overlap < threshold) return std::nullopt;

  std::size_t best_cover = 0, best_first = 0, best_len = 0;
  for (std::size_t first = 0; first < n; ++first) {
    std::set<std::string> span;
    for (std::size_t len = 1; len <= span_turns && first + len <= n; ++len) {
      span.insert(hits[first + len - 1].begin(), hits[first + len - 1].end());
      bool better = span.size() > best_cover || (span.size() == best_cover && len < best_len) ||
                    (span.size() == best_cover && len == best_len && first > best_first) || best_len == 0;
      if (better) {
        best_cover = span.size();
        best_first = first;
        best_len = len;
      }
    }
  }
  ActiveSpan out;
  out.first = best_first;
  out.last = best_first + best_len - 1;
  out.overlap = overlap;
  std::vector<std::string> lines;
  for (std::size_t i = out.first; i <= out.last; ++i) lines.push_back(turns[i]->role + ": " + turns[i]->text);
  out.text = text::join(lines, "\n");
  return out;
}

struct Pipeline::PassOutcome {
  PassTrace trace;
  AnswerDraft draft;
  std::optional<Verdict> verdict;
};

Pipeline::Pipeline(PipelineConfig config, PromptLibrary prompts, std::shared_ptr<const Embedder> embedder)
    : config_(std::move(config)),
      prompts_(std::move(prompts)),
      embedder_(std::move(embedder)),
      router_(prompts_.router(), config_.router_max_new_tokens),
      validator_(prompts_.validator(), prompts_.validator_user(), config_.validator) {
  if (!embedder_) throw std::invalid_argument("pipeline needs an embedder");
}

EvidenceBundle Pipeline::evidence(std::string_view query, ActionTag tag, const MemoryStore& store,
                                  const HybridIndex& index) const {
  const auto& p = config_.retrieval;
  auto flat = [&](std::size_t k) {
    EvidenceBundle b;
    b.tag = tag;
    b.episodic = annotate(index, hybrid_rank(index, query, k, *embedder_, p));
    return b;
  };
  if (config_.ablations.uniform_rag) return flat(p.base_top_k);
  if (config_.ablations.no_retrieval_strategy && tag != ActionTag::ProfileInjection)
    return flat(config_.flavor == StoreFlavor::Document ? p.tier2_doc_top_k : p.tier2_top_k);
  TierInputs in{store, index, *embedder_, p, config_.flavor};
  return build_evidence(in, query, tag);
}

Pipeline::PassOutcome Pipeline::run_pass(std::string_view query, ActionTag tag, const MemoryStore& store,
                                         const HybridIndex& index, const LlmGateway& gateway) const {
  PassOutcome out;
  auto bundle = evidence(query, tag, store, index);
  PackedContext packed = config_.ablations.no_packer
                             ? pack_plain(bundle, config_.budget, gateway.counter())
                             : pack(refine(std::move(bundle), query, *embedder_), config_.budget, gateway.counter());
  auto req = render_prompt(prompts_, tag, packed.text, query, config_.flavor, config_.answer_max_new_tokens);
  out.draft = generate(gateway, req, packed.text, tag, !config_.ablations.no_tools);
  if (!config_.ablations.no_validator) out.verdict = validator_.validate(out.draft.text, packed.text, query, &gateway);

  out.trace.tag = tag;
  out.trace.packed_tokens = packed.total_tokens;
  out.trace.included = packed.included;
  out.trace.dropped = packed.dropped;
  out.trace.answer = out.draft.text;
  out.trace.tool_rounds = out.draft.tool_rounds_used;
  for (const auto& t : out.draft.tool_calls) out.trace.tool_calls.push_back(t.rendered);
  if (out.verdict) {
    out.trace.grounded = out.verdict->grounded;
    out.trace.verdict_stage = out.verdict->stage;
  }
  return out;
}

PipelineResult Pipeline::answer_query(std::string_view query, const MemoryStore* store, const HybridIndex* index,
                                      const LlmGateway& gateway) const {
  if (!store) throw Error(Errc::StoreNotReady, "no memory store loaded");
  PipelineResult r;
  for (auto name : kStages) r.stage_traces.push_back({std::string(name)});

  if (auto span = active_context_check(query, store->history, config_.active_window_turns,
                                       config_.active_overlap_threshold, config_.active_span_turns)) {
    r.short_circuited = true;
    r.answer = span->text;
    return r;
  }
  if (!index) throw Error(Errc::IndexNotReady, "no retrieval index built");

  // Stage 2: routing.
  if (config_.ablations.no_router) {
    r.action_tag = ActionTag::TargetedExtraction;
    r.decided_by = DecidedBy::Fixed;
  } else {
    auto routed = router_.route(query, &gateway);
    r.action_tag = routed.decision.action_tag;
    r.decided_by = routed.decision.decided_by;
    if (routed.llm_call) {
      const auto& c = *routed.llm_call;
      charge(stage_ref(r, "router"), c.prompt_tokens, c.completion_tokens, 1);
      r.total_tokens += c.total_tokens();
      r.fixed_wrapper_tokens += c.wrapper_tokens;
      ++r.slm_call_count;
      ++r.stage_slm_calls;
    }
  }

  auto account = [&](const PassOutcome& pass, std::string_view answer_stage, bool retry) {
    const auto& d = pass.draft;
    charge(stage_ref(r, answer_stage), d.prompt_tokens, d.completion_tokens, std::min<std::size_t>(d.gateway_calls, 1));
    charge(stage_ref(r, "tools"), d.tool_prompt_tokens, d.tool_completion_tokens, d.tool_rounds_used);
    r.total_tokens += d.prompt_tokens + d.completion_tokens + d.tool_prompt_tokens + d.tool_completion_tokens +
                      d.wrapper_tokens;
    r.fixed_wrapper_tokens += d.wrapper_tokens;
    r.slm_call_count += d.gateway_calls;
    r.tool_continuations += d.tool_rounds_used;
    r.stage_slm_calls += std::min<std::size_t>(d.gateway_calls, 1);
    if (pass.verdict && pass.verdict->judge_call) {
      const auto& j = *pass.verdict->judge_call;
      charge(stage_ref(r, "validator"), j.prompt_tokens, j.completion_tokens, 1);
      r.total_tokens += j.total_tokens();
      r.fixed_wrapper_tokens += j.wrapper_tokens;
      ++r.slm_call_count;
      if (retry)
        ++r.escalation_judge_calls;
      else
        ++r.stage_slm_calls;
    }
    r.passes.push_back(pass.trace);
  };

  auto first = run_pass(query, r.action_tag, *store, *index, gateway);
  account(first, "answer", false);
  r.packed_tokens = first.trace.packed_tokens;
  if (!first.verdict || first.verdict->grounded) {
    r.answer = first.draft.text;
    return r;
  }

  // One retry under the escalation tag, evidence rebuilt from scratch.
  r.escalation_triggered = true;
  auto retry = run_pass(query, escalation_target(r.action_tag), *store, *index, gateway);
  account(retry, "escalation_answer", true);
  if (retry.verdict && retry.verdict->grounded) {
    r.is_escalated = true;
    r.answer = retry.draft.text;
    r.packed_tokens = retry.trace.packed_tokens;
  } else if (first.verdict->stage != VerdictStage::HardFailure) {
    r.answer = first.draft.text;
  } else {
    r.answer = std::string(kAbstention);
  }
  return r;
}

TraceSummary trace_summary(const std::vector<PipelineResult>& results) {
  TraceSummary s;
  s.queries = results.size();
  for (auto name : kStages) {
    s.invocation_rate[std::string(name)] = 0.0;
    s.mean_stage_tokens[std::string(name)] = 0.0;
  }
  if (results.empty()) return s;
  const double n = static_cast<double>(results.size());
  std::vector<std::size_t> packed;
  for (const auto& r : results) {
    packed.push_back(r.packed_tokens);
    s.mean_packed_tokens += static_cast<double>(r.packed_tokens) / n;
    s.mean_pipeline_tokens += static_cast<double>(r.total_tokens) / n;
    s.short_circuit_rate += r.short_circuited ? 1.0 / n : 0.0;
    s.escalation_triggered_rate += r.escalation_triggered ? 1.0 / n : 0.0;
    s.escalation_adopted_rate += r.is_escalated ? 1.0 / n : 0.0;
    for (const auto& st : r.stage_traces) {
      s.invocation_rate[st.stage] += st.invoked ? 1.0 / n : 0.0;
      s.mean_stage_tokens[st.stage] += static_cast<double>(st.tokens()) / n;
    }
  }
  std::sort(packed.begin(), packed.end());
  const auto mid = packed.size() / 2;
  s.median_packed_tokens = packed.size() % 2 ? static_cast<double>(packed[mid])
                                             : (static_cast<double>(packed[mid - 1]) + static_cast<double>(packed[mid])) / 2.0;
  return s;
}

json to_json(const TraceSummary& s) {
  return {{"queries", s.queries},
          {"mean_packed_tokens", s.mean_packed_tokens},
          {"median_packed_tokens", s.median_packed_tokens},
          {"mean_pipeline_tokens", s.mean_pipeline_tokens},
          {"invocation_rate", s.invocation_rate},
          {"mean_stage_tokens", s.mean_stage_tokens},
          {"short_circuit_rate", s.short_circuit_rate},
          {"escalation_triggered_rate", s.escalation_triggered_rate},
          {"escalation_adopted_rate", s.escalation_adopted_rate}};
}

}  // namespace memflow
