#include "memflow/llm_gateway.hpp"

#include <fstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>

#include "memflow/error.hpp"
#include "memflow/text.hpp"

namespace memflow {

using nlohmann::json;

Url parse_url(std::string_view url) {
  auto scheme_end = url.find("://");
  std::size_t host_start = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

namespace {

void apply_timeouts(httplib::Client& cli, std::chrono::milliseconds timeout) {
  auto sec = static_cast<time_t>(timeout.count() / 1000);
  auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
}

Errc classify_transport(httplib::Error e) {
  switch (e) {
    case httplib::Error::ConnectionTimeout:
    case httplib::Error::Read:
      return Errc::TimeoutError;
    default:
      return Errc::NetworkError;
  }
}

}  // namespace

TokenCounter TokenCounter::external(std::string endpoint, std::chrono::milliseconds timeout) {
  TokenCounter c;
  c.mode_ = Mode::External;
  c.endpoint_ = std::move(endpoint);
  c.timeout_ = timeout;
  return c;
}

std::size_t TokenCounter::count(std::string_view s) const {
  if (mode_ == Mode::Approximate) {
    auto words = text::count_words(s);
    return (4 * words + 2) / 3;
  }
  if (s.empty()) return 0;
  auto url = parse_url(endpoint_);
  httplib::Client cli(url.origin);
  apply_timeouts(cli, timeout_);
  auto res = cli.Post(url.path, json{{"content", s}}.dump(), "application/json");
  if (!res) throw Error(Errc::NetworkError, "tokenize endpoint " + endpoint_ + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(Errc::NetworkError, "tokenize endpoint returned HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body).at("tokens").size();
  } catch (const json::exception& e) {
    throw Error(Errc::NetworkError, std::string("tokenize endpoint: bad response: ") + e.what());
  }
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)), url_(parse_url(cfg_.endpoint)) {
  if (url_.path == "/" || url_.path.empty()) {
    url_.path = "/v1/chat/completions";
  } else if (url_.path.find("chat/completions") == std::string::npos) {
    if (url_.path.back() == '/') url_.path.pop_back();
    url_.path += "/chat/completions";
  }
}

json HttpChatBackend::request_body(const HttpBackendConfig& cfg, const ChatRequest& req) {
  json messages = json::array();
  if (!req.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
  for (const auto& m : req.prior) messages.push_back({{"role", m.role}, {"content", m.content}});
  messages.push_back({{"role", "user"}, {"content", req.user_message}});
  json body = {{"messages", std::move(messages)},
               {"max_tokens", req.max_new_tokens},
               {"temperature", req.temperature},
               {"stream", false}};
  if (!cfg.model.empty()) body["model"] = cfg.model;
  return body;
}

ChatResponse HttpChatBackend::complete(const ChatRequest& req) {
  const auto body = request_body(cfg_, req).dump();
  Errc last_code = Errc::NetworkError;
  std::string last_msg;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(cfg_.backoff * (1 << (attempt - 1)));
    httplib::Client cli(url_.origin);
    apply_timeouts(cli, cfg_.timeout);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    auto res = cli.Post(url_.path, headers, body, "application/json");
    if (!res) {
      last_code = classify_transport(res.error());
      last_msg = cfg_.endpoint + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_code = Errc::BackendRefused;
      last_msg = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      continue;
    }
    if (res->status != 200)
      throw Error(Errc::BackendRefused, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    try {
      auto j = json::parse(res->body);
      ChatResponse out;
      const auto& content = j.at("choices").at(0).at("message").at("content");
      out.text = content.is_string() ? content.get<std::string>() : std::string{};
      if (j.contains("usage") && j["usage"].is_object()) {
        const auto& u = j["usage"];
        if (u.contains("prompt_tokens")) out.backend_prompt_tokens = u["prompt_tokens"].get<std::size_t>();
        if (u.contains("completion_tokens"))
          out.backend_completion_tokens = u["completion_tokens"].get<std::size_t>();
      }
      return out;
    } catch (const json::exception& e) {
      throw Error(Errc::BackendRefused, std::string("malformed completion response: ") + e.what());
    }
  }
  throw Error(last_code, last_msg + " (after " + std::to_string(cfg_.retries + 1) + " attempts)");
}

ScriptedBackend::ScriptedBackend(std::vector<Rule> rules) : rules_(std::move(rules)), cursor_(rules_.size(), 0) {
  if (rules_.empty()) throw std::invalid_argument("scripted backend needs at least one rule");
  for (const auto& r : rules_) {
    if (r.replies.empty()) throw std::invalid_argument("scripted rule without replies");
  }
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& script) {
  const json& arr = script.is_object() ? script.at("rules") : script;
  if (!arr.is_array()) throw Error(Errc::ConfigError, "script must be an array of rules");
  std::vector<Rule> rules;
  for (const auto& r : arr) {
    Rule rule;
    rule.user_contains = r.value("match", std::string{});
    rule.system_contains = r.value("system", std::string{});
    if (r.contains("replies")) {
      rule.replies = r.at("replies").get<std::vector<std::string>>();
    } else if (r.contains("reply")) {
      rule.replies.push_back(r.at("reply").get<std::string>());
    }
    rules.push_back(std::move(rule));
  }
  try {
    return std::make_shared<ScriptedBackend>(std::move(rules));
  } catch (const std::invalid_argument& e) {
    throw Error(Errc::ConfigError, e.what());
  }
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open script " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, "script " + path.string() + ": " + e.what());
  }
}

ChatResponse ScriptedBackend::complete(const ChatRequest& req) {
  std::lock_guard lock(mu_);
  log_.push_back(req);
  ChatResponse out;
  out.text = "ESCALATE_REQUIRED";
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    if (!r.user_contains.empty() && req.user_message.find(r.user_contains) == std::string::npos) continue;
    if (!r.system_contains.empty() && req.system_prompt.find(r.system_contains) == std::string::npos) continue;
    auto& cur = cursor_[i];
    out.text = r.replies[std::min(cur, r.replies.size() - 1)];
    if (cur < r.replies.size()) ++cur;
    break;
  }
  return out;
}

std::vector<ChatRequest> ScriptedBackend::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t ScriptedBackend::request_count() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

LlmGateway::LlmGateway(std::shared_ptr<ChatBackend> backend, TokenCounter counter,
                       std::size_t wrapper_tokens_per_message)
    : backend_(std::move(backend)), counter_(std::move(counter)), wrapper_per_message_(wrapper_tokens_per_message) {
  if (!backend_) throw std::invalid_argument("gateway requires a backend");
}

ChatResponse LlmGateway::complete(const ChatRequest& req) const {
  if (req.max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be >= 1");
  if (!(req.temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  ++calls_;
  auto res = backend_->complete(req);
  res.backend_label = backend_->label();
  std::size_t prompt = counter_.count(req.system_prompt) + counter_.count(req.user_message);
  for (const auto& m : req.prior) prompt += counter_.count(m.content);
  res.prompt_tokens = prompt;
  res.completion_tokens = counter_.count(res.text);
  std::size_t messages = 1 + req.prior.size() + (req.system_prompt.empty() ? 0 : 1);
  res.wrapper_tokens = wrapper_per_message_ * messages;
  return res;
}

}  // namespace memflow
