#include "memflow/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "memflow/error.hpp"
#include "memflow/text.hpp"

namespace memflow {

std::map<std::string, std::string> parse_config_text(std::string_view body) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(body, '\n')) {
    ++line_no;
    auto line = std::string_view(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(Errc::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    auto key = std::string(text::trim(line.substr(0, eq)));
    if (key.empty()) throw Error(Errc::ConfigError, "line " + std::to_string(line_no) + ": empty key");
    kv[key] = std::string(text::trim(line.substr(eq + 1)));
  }
  return kv;
}

namespace {

template <typename T>
T number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(Errc::ConfigError, key + ": not a number: '" + v + "'");
  return out;
}

double real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(Errc::ConfigError, key + ": not a number: '" + v + "'");
}

}  // namespace

void apply_config(const std::map<std::string, std::string>& kv, AppConfig& cfg) {
  auto& p = cfg.pipeline;
  auto& r = p.retrieval;
  for (const auto& [key, v] : kv) {
    if (key == "store") cfg.store_path = v;
    else if (key == "backend") cfg.backend = v;
    else if (key == "backend_model") cfg.backend_model = v;
    else if (key == "api_key") cfg.api_key = v;
    else if (key == "backend_timeout_ms") cfg.backend_timeout = std::chrono::milliseconds(number<long>(key, v));
    else if (key == "backend_retries") cfg.backend_retries = number<int>(key, v);
    else if (key == "token_counter") cfg.token_counter = v;
    else if (key == "embedder") cfg.embedder = v;
    else if (key == "embedder_model") cfg.embedder_model = v;
    else if (key == "embedder_dim") cfg.embedder_dim = number<std::size_t>(key, v);
    else if (key == "prompts_dir") cfg.prompts_dir = v;
    else if (key == "judge_backend") cfg.judge_backend = v;
    else if (key == "judge_model") cfg.judge_model = v;
    else if (key == "bench_workers") cfg.bench_workers = std::max<std::size_t>(1, number<std::size_t>(key, v));
    else if (key == "turns_per_chunk") cfg.turns_per_chunk = number<std::size_t>(key, v);
    else if (key == "host") cfg.host = v;
    else if (key == "port") cfg.port = number<int>(key, v);
    else if (key == "ablation") p.ablations = Ablations::parse(v);
    else if (key == "flavor") {
      auto f = parse_store_flavor(v);
      if (!f) throw Error(Errc::ConfigError, "flavor: expected chat, document or peer-conversation");
      p.flavor = *f;
    }
    else if (key == "answer_max_new_tokens") p.answer_max_new_tokens = number<std::size_t>(key, v);
    else if (key == "router_max_new_tokens") p.router_max_new_tokens = number<std::size_t>(key, v);
    else if (key == "active_window_turns") p.active_window_turns = number<std::size_t>(key, v);
    else if (key == "active_overlap_threshold") p.active_overlap_threshold = real(key, v);
    else if (key == "active_span_turns") p.active_span_turns = number<std::size_t>(key, v);
    else if (key == "tau_ground") p.validator.tau_ground = real(key, v);
    else if (key == "passthrough_words") p.validator.passthrough_words = number<std::size_t>(key, v);
    else if (key == "judge_context_chars") p.validator.judge_context_chars = number<std::size_t>(key, v);
    else if (key == "global_ceiling") p.budget.global_ceiling = number<std::size_t>(key, v);
    else if (key == "bm25_k1") r.k1 = real(key, v);
    else if (key == "bm25_b") r.b = real(key, v);
    else if (key == "rrf_k") r.rrf_k = real(key, v);
    else if (key == "base_top_k") r.base_top_k = number<std::size_t>(key, v);
    else if (key == "tier2_top_k") r.tier2_top_k = number<std::size_t>(key, v);
    else if (key == "tier2_doc_top_k") r.tier2_doc_top_k = number<std::size_t>(key, v);
    else if (key == "tier3_top_k") r.tier3_top_k = number<std::size_t>(key, v);
    else if (key == "tier3_broad_top_k") r.tier3_broad_top_k = number<std::size_t>(key, v);
    else if (key == "map_shard_turns") r.map_shard_turns = number<std::size_t>(key, v);
    else if (key.starts_with("budget.") || key.starts_with("word_cap.")) {
      auto dot = key.find('.');
      auto tag = parse_action_tag(std::string_view(key).substr(dot + 1));
      if (!tag) throw Error(Errc::ConfigError, key + ": unknown action tag");
      auto& tb = p.budget.per_tag[*tag];
      if (key.starts_with("budget.")) {
        tb.tier2_budget = number<std::size_t>(key, v);
      } else if (v == "none" || v == "0") {
        tb.word_cap.reset();
      } else {
        tb.word_cap = number<std::size_t>(key, v);
      }
    } else {
      throw Error(Errc::ConfigError, "unknown config key '" + key + "'");
    }
  }
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigError, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  AppConfig cfg;
  try {
    apply_config(parse_config_text(ss.str()), cfg);
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, path.string() + ": " + e.what());
  }
  return cfg;
}

std::shared_ptr<ChatBackend> make_backend(const std::string& spec, const std::string& model, const AppConfig& cfg) {
  if (spec.starts_with("scripted:")) return ScriptedBackend::from_file(spec.substr(9));
  if (spec.starts_with("http://") || spec.starts_with("https://")) {
    HttpBackendConfig hc;
    hc.endpoint = spec;
    hc.model = model;
    hc.api_key = cfg.api_key;
    if (hc.api_key.empty()) {
      if (const char* env = std::getenv("MEMFLOW_API_KEY")) hc.api_key = env;
    }
    hc.timeout = cfg.backend_timeout;
    hc.retries = cfg.backend_retries;
    return std::make_shared<HttpChatBackend>(hc);
  }
  throw Error(Errc::ConfigError, "backend must be an http(s) URL or scripted:<path>, got '" + spec + "'");
}

TokenCounter make_counter(const AppConfig& cfg) {
  if (cfg.token_counter.empty() || cfg.token_counter == "approximate") return TokenCounter::approximate();
  return TokenCounter::external(cfg.token_counter);
}

std::shared_ptr<const Embedder> make_embedder(const AppConfig& cfg) {
  if (cfg.embedder.empty() || cfg.embedder == "hashing") return std::make_shared<HashingEmbedder>(cfg.embedder_dim);
  return std::make_shared<HttpEmbedder>(cfg.embedder, cfg.embedder_model, cfg.embedder_dim);
}

PromptLibrary make_prompts(const AppConfig& cfg) {
  return cfg.prompts_dir.empty() ? PromptLibrary::bundled() : PromptLibrary::with_overrides(cfg.prompts_dir);
}

}  // namespace memflow
