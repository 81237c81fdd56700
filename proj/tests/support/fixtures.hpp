#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "memflow/harness.hpp"
#include "memflow/llm_gateway.hpp"
#include "memflow/memory_store.hpp"
#include "memflow/pipeline.hpp"
#include "memflow/retrieval.hpp"

namespace fixtures {

using Turns = std::vector<std::pair<std::string, std::string>>;

nlohmann::json session(const std::string& id, const std::string& ts, const Turns& turns);

/// Seven dated sessions: a car purchase, a GPS repair, two job changes,
/// hiking trips, a support-desk rule and magazine subscriptions.
nlohmann::json sample_sessions();
memflow::ConversationHistory sample_history();

/// Store, hashing embedder and index over sample_history().
struct World {
  memflow::MemoryStore store;
  std::shared_ptr<memflow::HashingEmbedder> embedder;
  memflow::HybridIndex index;
};
World sample_world();

/// Twenty generic-format items over sample_sessions(), covering all seven
/// action tags.
nlohmann::json synthetic_benchmark_json();

/// Scripted replies for the synthetic benchmark: grounded answers, a
/// temporal tool call, and one item that only succeeds on retry.
std::vector<memflow::ScriptedBackend::Rule> synthetic_script();

std::shared_ptr<memflow::LlmGateway> gateway(std::shared_ptr<memflow::ChatBackend> backend);

memflow::Pipeline default_pipeline(memflow::PipelineConfig cfg = {});

}  // namespace fixtures
