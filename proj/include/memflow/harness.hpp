#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "memflow/llm_gateway.hpp"
#include "memflow/memory_store.hpp"
#include "memflow/pipeline.hpp"
#include "memflow/prompts.hpp"

namespace memflow {

enum class BenchFormat { Generic, LongMemEval, LoCoMo, LongBench };
std::string_view to_string(BenchFormat f);
/// Throws Error{UnknownFormat}.
BenchFormat parse_bench_format(std::string_view s);

struct BenchItem {
  std::string question_id;
  std::string question;
  std::string gold_answer;
  std::string question_type;
  std::size_t history = 0;  // index into Benchmark::histories

  bool operator==(const BenchItem&) const = default;
};

struct Benchmark {
  std::vector<BenchItem> items;
  std::vector<ConversationHistory> histories;
  StoreFlavor flavor = StoreFlavor::Chat;
};

/// Maps a benchmark file to histories and items. Throws Error{SchemaError}
/// with a JSON path for missing or mistyped fields, Error{IoError} for
/// unreadable files.
Benchmark load_benchmark(const std::filesystem::path& path, BenchFormat format);
Benchmark parse_benchmark(const nlohmann::json& doc, BenchFormat format);

struct JudgeVerdict {
  bool correct = false;
  std::string raw;
  bool gpt4o_fallback = false;
};

/// True when `predicted` contains at least half of the gold content tokens.
bool overlap_correct(std::string_view gold, std::string_view predicted);

/// Optional accuracy judge. Without a gateway, or when the call or its JSON
/// fails, the token-recall check decides. Never throws.
class AnswerJudge {
 public:
  AnswerJudge(const LlmGateway* gateway, PromptLibrary prompts) : gateway_(gateway), prompts_(std::move(prompts)) {}

  ChatRequest request(std::string_view question, std::string_view gold, std::string_view predicted) const;
  JudgeVerdict judge(std::string_view question, std::string_view gold, std::string_view predicted) const;

 private:
  const LlmGateway* gateway_;
  PromptLibrary prompts_;
};

/// Parses {"correct": true|false} anywhere in the reply.
std::optional<bool> parse_correct_json(std::string_view reply);

struct EvalRecord {
  std::string question_id;
  std::string question_type;
  std::string question;
  std::string gold;
  std::string predicted;
  std::string action_tag;
  std::string decided_by;
  bool is_escalated = false;
  bool escalation_triggered = false;
  bool short_circuited = false;
  std::size_t packed_tokens = 0;
  std::size_t total_tokens = 0;
  std::size_t fixed_wrapper_tokens = 0;
  std::size_t slm_call_count = 0;
  std::map<std::string, std::size_t> stage_tokens;
  std::map<std::string, bool> stage_invoked;
  std::optional<bool> judge_verdict;
  bool gpt4o_fallback = false;
  std::optional<std::string> error;

  bool operator==(const EvalRecord&) const = default;
};

nlohmann::json to_json(const EvalRecord& r);
/// Throws Error{SchemaError} on missing fields.
EvalRecord eval_record_from_json(const nlohmann::json& j);

struct BenchOptions {
  std::size_t workers = 1;
  std::size_t turns_per_chunk = 3;
};

struct BenchReport {
  std::vector<EvalRecord> records;  // ordered by question_id
  std::vector<PipelineResult> results;
  nlohmann::json summary;
};

/// Builds one store and index per history and answers every item. Item
/// failures are recorded and the run continues.
BenchReport run_bench(const Benchmark& bench, const Pipeline& pipeline, const LlmGateway& gateway,
                      const AnswerJudge* judge, const BenchOptions& options = {});

void write_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_records(const std::filesystem::path& path);

}  // namespace memflow
