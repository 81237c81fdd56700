#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace memflow {

struct ChatMessage {
  std::string role;  // "user" | "assistant"
  std::string content;
};

struct ChatRequest {
  std::string system_prompt;
  /// Earlier exchanges that precede `user_message` (tool continuations).
  std::vector<ChatMessage> prior;
  std::string user_message;
  std::size_t max_new_tokens = 256;
  double temperature = 0.0;
};

struct ChatResponse {
  std::string text;
  std::size_t prompt_tokens = 0;      // counter units over system + prior + user
  std::size_t completion_tokens = 0;  // counter units over text
  std::size_t wrapper_tokens = 0;     // chat-template overhead not owned by any stage
  std::string backend_label;
  std::optional<std::size_t> backend_prompt_tokens;  // as reported by an HTTP backend
  std::optional<std::size_t> backend_completion_tokens;

  std::size_t total_tokens() const { return prompt_tokens + completion_tokens + wrapper_tokens; }
};

/// Splits "http://host:port/path" into an origin and a path.
struct Url {
  std::string origin;
  std::string path;
};
Url parse_url(std::string_view url);

/// Token counting used for every budget. Approximate mode is
/// ceil(4/3 * whitespace words); external mode posts {"content": text} to a
/// tokenize endpoint and counts the returned "tokens" array.
class TokenCounter {
 public:
  enum class Mode { Approximate, External };

  TokenCounter() = default;
  static TokenCounter approximate() { return {}; }
  static TokenCounter external(std::string endpoint,
                               std::chrono::milliseconds timeout = std::chrono::seconds(10));

  std::size_t count(std::string_view text) const;
  Mode mode() const { return mode_; }

 private:
  Mode mode_ = Mode::Approximate;
  std::string endpoint_;
  std::chrono::milliseconds timeout_{10000};
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Only `text` (and optionally backend_* usage) need be filled.
  virtual ChatResponse complete(const ChatRequest& req) = 0;
  virtual std::string label() const = 0;
};

struct HttpBackendConfig {
  std::string endpoint;  // base URL or full .../chat/completions URL
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{60000};
  int retries = 2;
  std::chrono::milliseconds backoff{500};
};

/// OpenAI-compatible /v1/chat/completions client.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig cfg);
  ChatResponse complete(const ChatRequest& req) override;
  std::string label() const override { return "http:" + cfg_.model; }

  static nlohmann::json request_body(const HttpBackendConfig& cfg, const ChatRequest& req);

 private:
  HttpBackendConfig cfg_;
  Url url_;
};

/// Deterministic backend for offline runs. The first rule whose matchers
/// fire supplies the reply; a rule with several replies hands them out in
/// order and then repeats the last one. No match yields "ESCALATE_REQUIRED".
class ScriptedBackend final : public ChatBackend {
 public:
  struct Rule {
    std::string user_contains;    // substring of user_message; empty matches anything
    std::string system_contains;  // substring of system_prompt; empty matches anything
    std::vector<std::string> replies;
  };

  explicit ScriptedBackend(std::vector<Rule> rules);
  /// {"rules": [{"match": str, "system": str, "reply": str | "replies": [str]}]}
  /// or the bare array.
  static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& script);
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  ChatResponse complete(const ChatRequest& req) override;
  std::string label() const override { return "scripted"; }

  std::vector<ChatRequest> requests() const;
  std::size_t request_count() const;

 private:
  mutable std::mutex mu_;
  std::vector<Rule> rules_;
  std::vector<std::size_t> cursor_;
  std::vector<ChatRequest> log_;
};

/// The single boundary to the chat model. Thread-safe.
class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<ChatBackend> backend, TokenCounter counter = {},
             std::size_t wrapper_tokens_per_message = 4);

  /// Throws std::invalid_argument for bad requests; backend errors propagate
  /// as memflow::Error (NetworkError, TimeoutError, BackendRefused).
  ChatResponse complete(const ChatRequest& req) const;

  const TokenCounter& counter() const { return counter_; }
  std::size_t call_count() const { return calls_.load(); }
  std::string backend_label() const { return backend_->label(); }

 private:
  std::shared_ptr<ChatBackend> backend_;
  TokenCounter counter_;
  std::size_t wrapper_per_message_;
  mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace memflow
