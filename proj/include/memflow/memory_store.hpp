#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "memflow/timeutil.hpp"

namespace memflow {

inline constexpr int kStoreVersion = 1;
inline constexpr std::size_t kDefaultTurnsPerChunk = 3;

struct Turn {
  std::string role;  // "user", "assistant" or a speaker name
  std::string text;
  std::size_t turn_index = 0;

  bool operator==(const Turn&) const = default;
};

struct Session {
  std::string session_id;
  Timestamp timestamp{};
  std::vector<Turn> turns;

  bool operator==(const Session&) const = default;
};

/// The full history, sessions ordered by (timestamp, session_id).
struct ConversationHistory {
  std::vector<Session> sessions;
  std::string source_label;

  std::size_t turn_count() const;
  bool operator==(const ConversationHistory&) const = default;
};

struct TurnSpan {
  std::size_t first = 0;
  std::size_t last = 0;

  bool operator==(const TurnSpan&) const = default;
};

/// Retrieval unit: a run of consecutive turns from one session.
struct Chunk {
  std::string chunk_id;
  std::string session_id;
  std::optional<Timestamp> session_timestamp;
  std::size_t session_order = 0;  // position of the session in the history
  std::string text;
  TurnSpan turn_span;

  bool operator==(const Chunk&) const = default;
};

struct ProfileFact {
  std::string key;    // category, e.g. "preference"
  std::string value;  // the matched sentence
  std::string session_id;
  Timestamp timestamp{};

  bool operator==(const ProfileFact&) const = default;
};

struct UserProfile {
  std::vector<ProfileFact> facts;  // ordered by timestamp

  bool empty() const { return facts.empty(); }
  /// One line per fact, grouped by key (alphabetical), newest first within a key.
  std::string render() const;
  bool operator==(const UserProfile&) const = default;
};

/// Phrase that marks a first-person profile statement, and the key it files under.
struct ProfilePattern {
  std::string phrase;
  std::string key;
};

const std::vector<ProfilePattern>& default_profile_patterns();

/// Validates and orders raw session records. Each record is
/// {"session_id", "timestamp", "turns": [{"role", "text"[, "turn_index"]}]}.
/// Throws Error{MalformedRecord} or Error{BadTimestamp}.
ConversationHistory ingest_history(const nlohmann::json& records, std::string source_label = {});

/// Partitions every session into chunks of `turns_per_chunk` consecutive turns.
/// Sessions stamped at the epoch count as undated.
std::vector<Chunk> chunk_history(const ConversationHistory& h,
                                 std::size_t turns_per_chunk = kDefaultTurnsPerChunk);

UserProfile compile_profile(const ConversationHistory& h,
                            const std::vector<ProfilePattern>& patterns = default_profile_patterns());

/// Immutable after construction; safe for concurrent readers.
struct MemoryStore {
  ConversationHistory history;
  UserProfile profile;

  static MemoryStore from_history(ConversationHistory h);
  bool operator==(const MemoryStore&) const = default;
};

nlohmann::json session_to_json(const Session& s);
nlohmann::json fact_to_json(const ProfileFact& f);

/// Writes `path` (header line + one session per line) and `path.profile.jsonl`.
void save_store(const MemoryStore& store, const std::filesystem::path& path);
/// Throws Error{IoError} or Error{CorruptStore} naming the offending line.
MemoryStore load_store(const std::filesystem::path& path);
std::filesystem::path profile_sidecar_path(const std::filesystem::path& store_path);

}  // namespace memflow
