#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "memflow/action_tag.hpp"
#include "memflow/answer.hpp"
#include "memflow/llm_gateway.hpp"
#include "memflow/memory_store.hpp"
#include "memflow/packer.hpp"
#include "memflow/prompts.hpp"
#include "memflow/retrieval.hpp"
#include "memflow/router.hpp"
#include "memflow/tier_exec.hpp"
#include "memflow/validator.hpp"

namespace memflow {

inline constexpr std::string_view kAbstention = "I could not find reliable information.";

struct Ablations {
  bool uniform_rag = false;
  bool no_router = false;
  bool no_tools = false;
  bool no_validator = false;
  bool no_packer = false;
  bool no_retrieval_strategy = false;

  bool any() const { return *this != Ablations{}; }
  std::vector<std::string> names() const;
  /// Comma-separated names; "none" or "" means no ablation. Throws
  /// Error{ConfigError} on unknown names.
  static Ablations parse(std::string_view list);
  bool operator==(const Ablations&) const = default;
};

struct PipelineConfig {
  Ablations ablations;
  PackBudget budget = PackBudget::defaults();
  RetrievalParams retrieval;
  ValidatorParams validator;
  StoreFlavor flavor = StoreFlavor::Chat;
  std::size_t answer_max_new_tokens = 256;
  std::size_t router_max_new_tokens = 64;
  std::size_t active_window_turns = 8;
  double active_overlap_threshold = 0.6;
  std::size_t active_span_turns = 3;
};

struct StageTrace {
  std::string stage;  // router | answer | validator | escalation_answer | tools
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  bool invoked = false;
  std::size_t calls = 0;

  std::size_t tokens() const { return prompt_tokens + completion_tokens; }
  bool operator==(const StageTrace&) const = default;
};

struct PassTrace {
  ActionTag tag = ActionTag::TargetedExtraction;
  std::size_t packed_tokens = 0;
  std::vector<std::string> included;
  std::vector<std::string> dropped;
  std::string answer;
  bool grounded = false;
  std::optional<VerdictStage> verdict_stage;  // empty when validation is ablated
  std::size_t tool_rounds = 0;
  std::vector<std::string> tool_calls;  // rendered TOOL_RESULT lines

  bool operator==(const PassTrace&) const = default;
};

struct PipelineResult {
  std::string answer;
  ActionTag action_tag = ActionTag::TargetedExtraction;
  DecidedBy decided_by = DecidedBy::Heuristic;
  bool is_escalated = false;          // the answer came from the retry pass
  bool escalation_triggered = false;  // a retry pass ran
  bool short_circuited = false;
  std::size_t packed_tokens = 0;
  std::vector<StageTrace> stage_traces;  // fixed order: router, answer, validator, escalation_answer, tools
  std::size_t slm_call_count = 0;        // every gateway call, tool continuations included
  std::size_t stage_slm_calls = 0;       // router + answer + first judge + escalation answer
  std::size_t escalation_judge_calls = 0;
  std::size_t tool_continuations = 0;
  std::size_t total_tokens = 0;
  std::size_t fixed_wrapper_tokens = 0;
  std::vector<PassTrace> passes;

  const StageTrace& stage(std::string_view name) const;
  bool operator==(const PipelineResult&) const = default;
};

nlohmann::json to_json(const PipelineResult& r);

struct ActiveSpan {
  std::size_t first = 0;  // offsets into the considered window
  std::size_t last = 0;
  double overlap = 0.0;   // query recall over the whole window
  std::string text;
};

/// Flattened turns across sessions, oldest first.
std::vector<const Turn*> flatten_turns(const ConversationHistory& h);

/// Short-circuit check over the last `window` turns: when at least
/// `threshold` of the query's content tokens appear there, returns the run
/// of at most `span_turns` consecutive turns covering the most of them
/// (shorter, then later, on ties).
std::optional<ActiveSpan> active_context_check(std::string_view query, const ConversationHistory& history,
                                               std::size_t window = 8, double threshold = 0.6,
                                               std::size_t span_turns = 3);

class Pipeline {
 public:
  Pipeline(PipelineConfig config, PromptLibrary prompts, std::shared_ptr<const Embedder> embedder);

  /// Throws Error{StoreNotReady} for a null store and Error{IndexNotReady}
  /// when retrieval is needed without an index.
  PipelineResult answer_query(std::string_view query, const MemoryStore* store, const HybridIndex* index,
                              const LlmGateway& gateway) const;

  const PipelineConfig& config() const { return config_; }
  const PromptLibrary& prompts() const { return prompts_; }
  const Embedder& embedder() const { return *embedder_; }

 private:
  struct PassOutcome;
  PassOutcome run_pass(std::string_view query, ActionTag tag, const MemoryStore& store, const HybridIndex& index,
                       const LlmGateway& gateway) const;
  EvidenceBundle evidence(std::string_view query, ActionTag tag, const MemoryStore& store,
                          const HybridIndex& index) const;

  PipelineConfig config_;
  PromptLibrary prompts_;
  std::shared_ptr<const Embedder> embedder_;
  Router router_;
  Validator validator_;
};

struct TraceSummary {
  std::size_t queries = 0;
  double mean_packed_tokens = 0.0;
  double median_packed_tokens = 0.0;
  double mean_pipeline_tokens = 0.0;
  std::map<std::string, double> invocation_rate;   // per stage
  std::map<std::string, double> mean_stage_tokens;  // per stage, over all queries
  double short_circuit_rate = 0.0;
  double escalation_triggered_rate = 0.0;
  double escalation_adopted_rate = 0.0;
};

TraceSummary trace_summary(const std::vector<PipelineResult>& results);
nlohmann::json to_json(const TraceSummary& s);

}  // namespace memflow
