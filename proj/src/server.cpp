#include "memflow/server.hpp"

#include <httplib.h>

#include "memflow/error.hpp"

namespace memflow {

using nlohmann::json;

MemflowService::MemflowService(std::shared_ptr<const Pipeline> pipeline, std::shared_ptr<const LlmGateway> gateway,
                               std::filesystem::path store_path, std::size_t turns_per_chunk)
    : pipeline_(std::move(pipeline)),
      gateway_(std::move(gateway)),
      store_path_(std::move(store_path)),
      turns_per_chunk_(turns_per_chunk),
      http_(std::make_unique<httplib::Server>()) {
  install_routes();
}

MemflowService::~MemflowService() { stop(); }

void MemflowService::load() {
  if (store_path_.empty() || !std::filesystem::exists(store_path_)) return;
  swap_in(load_store(store_path_));
}

void MemflowService::swap_in(MemoryStore store) {
  reindexing_ = true;
  try {
    auto s = std::make_shared<const MemoryStore>(std::move(store));
    auto idx = std::make_shared<const HybridIndex>(
        HybridIndex::build(chunk_history(s->history, turns_per_chunk_), pipeline_->embedder()));
    std::unique_lock lock(mu_);
    store_ = std::move(s);
    index_ = std::move(idx);
  } catch (...) {
    reindexing_ = false;
    throw;
  }
  reindexing_ = false;
}

HttpReply MemflowService::health() const { return {200, {{"status", "ok"}, {"store_version", kStoreVersion}}}; }

HttpReply MemflowService::ingest(const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) return {400, {{"error", "malformed JSON body"}}};
  const json* records = &j;
  if (j.is_object()) {
    if (!j.contains("sessions")) return {400, {{"error", "expected {\"sessions\": [...]}"}}};
    records = &j["sessions"];
  }
  if (!records->is_array()) return {400, {{"error", "sessions must be an array"}}};

  std::lock_guard serial(ingest_mu_);
  json merged = json::array();
  std::string label;
  {
    std::shared_lock lock(mu_);
    if (store_) {
      label = store_->history.source_label;
      for (const auto& s : store_->history.sessions) merged.push_back(session_to_json(s));
    }
  }
  for (const auto& r : *records) merged.push_back(r);
  MemoryStore next;
  try {
    next = MemoryStore::from_history(ingest_history(merged, label));
  } catch (const Error& e) {
    return {400, {{"error", e.what()}, {"code", to_string(e.code())}}};
  }
  try {
    if (!store_path_.empty()) save_store(next, store_path_);
    const auto sessions = next.history.sessions.size();
    swap_in(std::move(next));
    std::shared_lock lock(mu_);
    return {200, {{"status", "ok"}, {"sessions", sessions}, {"chunks", index_->size()}}};
  } catch (const Error& e) {
    return {500, {{"error", e.what()}, {"code", to_string(e.code())}}};
  }
}

HttpReply MemflowService::query(const std::string& body) const {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("query") || !j["query"].is_string() ||
      j["query"].get<std::string>().empty())
    return {400, {{"error", "expected {\"query\": \"...\"}"}}};
  if (reindexing_) return {503, {{"error", "reindex in progress"}}};
  std::shared_lock lock(mu_, std::try_to_lock);
  if (!lock.owns_lock()) return {503, {{"error", "reindex in progress"}}};
  if (!store_) return {503, {{"error", "no store loaded"}}};
  try {
    auto r = pipeline_->answer_query(j["query"].get<std::string>(), store_.get(), index_.get(), *gateway_);
    return {200, to_json(r)};
  } catch (const Error& e) {
    return {500, {{"error", e.what()}, {"code", to_string(e.code())}}};
  }
}

void MemflowService::install_routes() {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  http_->Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  http_->Post("/ingest",
              [this, send](const httplib::Request& req, httplib::Response& res) { send(res, ingest(req.body)); });
  http_->Post("/query",
              [this, send](const httplib::Request& req, httplib::Response& res) { send(res, query(req.body)); });
}

bool MemflowService::listen(const std::string& host, int port) { return http_->listen(host, port); }

int MemflowService::bind_any(const std::string& host) { return http_->bind_to_any_port(host); }

bool MemflowService::listen_after_bind() { return http_->listen_after_bind(); }

void MemflowService::stop() {
  if (http_ && http_->is_running()) http_->stop();
}

}  // namespace memflow
