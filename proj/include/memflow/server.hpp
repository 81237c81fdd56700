#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "memflow/llm_gateway.hpp"
#include "memflow/memory_store.hpp"
#include "memflow/pipeline.hpp"
#include "memflow/retrieval.hpp"

namespace httplib {
class Server;
}

namespace memflow {

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

/// Request handling behind the HTTP routes, usable without a socket.
/// Queries share the current store and index; ingest rebuilds both and
/// swaps them in under an exclusive lock.
class MemflowService {
 public:
  MemflowService(std::shared_ptr<const Pipeline> pipeline, std::shared_ptr<const LlmGateway> gateway,
                 std::filesystem::path store_path = {}, std::size_t turns_per_chunk = kDefaultTurnsPerChunk);
  ~MemflowService();

  /// Loads `store_path` if it exists.
  void load();

  HttpReply health() const;
  HttpReply ingest(const std::string& body);
  HttpReply query(const std::string& body) const;

  bool reindexing() const { return reindexing_.load(); }

  /// Blocks until stop(). Returns false if the socket could not be bound.
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it, or -1.
  int bind_any(const std::string& host);
  bool listen_after_bind();
  void stop();

 private:
  void install_routes();
  void swap_in(MemoryStore store);

  std::shared_ptr<const Pipeline> pipeline_;
  std::shared_ptr<const LlmGateway> gateway_;
  std::filesystem::path store_path_;
  std::size_t turns_per_chunk_;

  mutable std::shared_mutex mu_;
  std::mutex ingest_mu_;
  std::atomic<bool> reindexing_{false};
  std::shared_ptr<const MemoryStore> store_;
  std::shared_ptr<const HybridIndex> index_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace memflow
