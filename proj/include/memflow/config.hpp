#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "memflow/llm_gateway.hpp"
#include "memflow/pipeline.hpp"
#include "memflow/retrieval.hpp"

namespace memflow {

/// Settings for the CLI and the service. Every field has a config-file key;
/// see docs/config.md.
struct AppConfig {
  PipelineConfig pipeline;
  std::string store_path;
  std::string backend;  // http(s) URL or "scripted:<path>"
  std::string backend_model = "qwen3-1.7b";
  std::string api_key;
  std::chrono::milliseconds backend_timeout = std::chrono::seconds(60);
  int backend_retries = 2;
  std::string token_counter = "approximate";  // or a tokenize endpoint URL
  std::string embedder = "hashing";           // or an embeddings endpoint URL
  std::string embedder_model;
  std::size_t embedder_dim = 384;
  std::string prompts_dir;
  std::string judge_backend;  // empty: overlap fallback only
  std::string judge_model = "gpt-4o-mini";
  std::size_t bench_workers = 1;
  std::size_t turns_per_chunk = 3;
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Parses "key = value" lines; '#' starts a comment. Throws
/// Error{ConfigError} naming the line for anything else.
std::map<std::string, std::string> parse_config_text(std::string_view text);

/// Throws Error{ConfigError} for unknown keys and unparseable values.
void apply_config(const std::map<std::string, std::string>& kv, AppConfig& cfg);

AppConfig load_config(const std::filesystem::path& path);

std::shared_ptr<ChatBackend> make_backend(const std::string& spec, const std::string& model, const AppConfig& cfg);
TokenCounter make_counter(const AppConfig& cfg);
std::shared_ptr<const Embedder> make_embedder(const AppConfig& cfg);
PromptLibrary make_prompts(const AppConfig& cfg);

}  // namespace memflow
