#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "memflow/action_tag.hpp"
#include "memflow/memory_store.hpp"
#include "memflow/retrieval.hpp"

namespace memflow {

enum class StoreFlavor { Chat, Document, PeerConversation };
std::string_view to_string(StoreFlavor f);
std::optional<StoreFlavor> parse_store_flavor(std::string_view s);

struct AnnotatedChunk {
  ScoredChunk scored;
  Chunk chunk;
  bool stale_flag = false;               // set only by recency_filter
  std::vector<std::string> date_labels;  // YYYY-MM-DD
  std::string section_header;

  bool operator==(const AnnotatedChunk&) const = default;
};

struct SummaryEntry {
  std::string session_id;
  std::string header;
  std::string text;
  double relevance = 0.0;

  bool operator==(const SummaryEntry&) const = default;
};

enum class EvidenceOrder { ScoreDescending, Chronological };

struct EvidenceBundle {
  std::string pinned;
  std::vector<SummaryEntry> summaries;
  std::vector<AnnotatedChunk> episodic;
  ActionTag tag = ActionTag::TargetedExtraction;
  EvidenceOrder order = EvidenceOrder::ScoreDescending;

  bool operator==(const EvidenceBundle&) const = default;
};

/// Everything a tier executor reads. All references must outlive the call.
struct TierInputs {
  const MemoryStore& store;
  const HybridIndex& index;
  const Embedder& embedder;
  RetrievalParams params;
  StoreFlavor flavor = StoreFlavor::Chat;
};

/// Looks up each ranked id in the index and attaches date labels.
std::vector<AnnotatedChunk> annotate(const HybridIndex& index, const std::vector<ScoredChunk>& ranking);

/// Throws Error{EmptyProfile} when there is nothing to pin.
EvidenceBundle execute_tier1(const UserProfile& profile, std::string_view query);

EvidenceBundle execute_tier2(const TierInputs& in, std::string_view query);

/// Stable: dated chunks ascending by (timestamp, turn start), then undated
/// chunks in session order.
std::vector<AnnotatedChunk> chronological_sort(std::vector<AnnotatedChunk> chunks);

/// Chunks sharing an anchor (case-insensitive) form a group. A chunk is
/// stale when it belongs to some group of two or more and is the newest in
/// none of them. `query` content terms count as anchors of the chunks that
/// contain them. Output is chronological.
std::vector<AnnotatedChunk> recency_filter(std::vector<AnnotatedChunk> chunks, std::string_view query = {});

/// Round-robin across sessions, best-ranked session first, until `limit`
/// chunks are picked.
std::vector<ScoredChunk> round_robin_sessions(const HybridIndex& index, const std::vector<ScoredChunk>& ranking,
                                              std::size_t limit);

/// Mean of cosine similarity and query content-term recall, in [0, 1].
double sentence_relevance(std::string_view sentence, std::string_view query, const Embedder& embedder);

/// Indices of the `n` most relevant sentences, returned in original order.
std::vector<std::size_t> top_sentences(const std::vector<std::string>& sentences, std::string_view query,
                                       const Embedder& embedder, std::size_t n);

struct Aggregate {
  std::vector<SummaryEntry> summaries;
  std::vector<AnnotatedChunk> episodic;
};
Aggregate diverse_aggregate(const TierInputs& in, std::string_view query);

/// Keeps chunks with modal or rule language; returns the input unchanged if
/// none qualify.
std::vector<AnnotatedChunk> constraint_filter(std::vector<AnnotatedChunk> chunks);

/// Near-duplicate removal, chronological order, "Session <id> (<date>)" headers.
std::vector<AnnotatedChunk> state_track_prepare(std::vector<AnnotatedChunk> chunks);

EvidenceBundle execute_tier3(const TierInputs& in, std::string_view query, ActionTag tag);

/// Dispatches on the tier of `tag`. Tier 1 with an empty profile yields an
/// empty bundle instead of throwing.
EvidenceBundle build_evidence(const TierInputs& in, std::string_view query, ActionTag tag);

}  // namespace memflow
