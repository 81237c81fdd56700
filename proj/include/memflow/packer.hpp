#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memflow/action_tag.hpp"
#include "memflow/llm_gateway.hpp"
#include "memflow/retrieval.hpp"
#include "memflow/tier_exec.hpp"

namespace memflow {

inline constexpr std::size_t kGlobalCeiling = 20480;
inline constexpr double kDedupThreshold = 0.85;
inline constexpr std::string_view kWordCapMarker = " ...";

inline constexpr std::string_view kProfileHeader = "== USER PROFILE ==";
inline constexpr std::string_view kSummaryHeader = "== AGGREGATED FACTS ==";
inline constexpr std::string_view kEvidenceHeader = "== CONVERSATION EVIDENCE ==";

struct TagBudget {
  std::size_t tier2_budget = 0;
  std::optional<std::size_t> word_cap;

  bool operator==(const TagBudget&) const = default;
};

struct PackBudget {
  std::size_t global_ceiling = kGlobalCeiling;
  std::map<ActionTag, TagBudget> per_tag;

  static PackBudget defaults();
  const TagBudget& for_tag(ActionTag tag) const;
};

struct PackSection {
  std::string name;  // "pinned" | "summaries" | "episodic"
  std::string text;
  std::size_t tokens = 0;
};

struct PackedContext {
  std::string text;
  std::vector<PackSection> sections;
  std::size_t total_tokens = 0;
  std::vector<std::string> included;  // episodic chunk ids in render order
  std::vector<std::string> dropped;   // chunk ids and "summary:<session>" entries left out
};

/// Keeps the higher-scored member of every near-duplicate pair; survivors
/// stay in input order.
std::vector<AnnotatedChunk> dedup_jaccard(std::vector<AnnotatedChunk> chunks, double threshold = kDedupThreshold);

/// The two most query-relevant sentences, in their original order.
std::string sentence_extract(std::string_view chunk_text, std::string_view query, const Embedder& embedder);

std::string apply_word_cap(std::string_view text, std::optional<std::size_t> cap_words);

/// Tags whose chunks are reduced to their most relevant sentences.
bool is_precision_tag(ActionTag tag);

/// Applies sentence extraction to precision tags; other bundles pass through.
EvidenceBundle refine(EvidenceBundle bundle, std::string_view query, const Embedder& embedder);

/// Throws Error{PinnedOverflow} if the pinned section alone exceeds the ceiling.
PackedContext pack(const EvidenceBundle& bundle, const PackBudget& budget, const TokenCounter& counter);

/// Unstructured concatenation of everything in the bundle, in retrieval
/// order, stopping before the ceiling would be exceeded.
PackedContext pack_plain(const EvidenceBundle& bundle, const PackBudget& budget, const TokenCounter& counter);

}  // namespace memflow
