#include "memflow/tier_exec.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "memflow/error.hpp"
#include "memflow/packer.hpp"
#include "memflow/text.hpp"
#include "memflow/timeutil.hpp"

namespace memflow {

std::string_view to_string(StoreFlavor f) {
  switch (f) {
    case StoreFlavor::Chat: return "chat";
    case StoreFlavor::Document: return "document";
    case StoreFlavor::PeerConversation: return "peer-conversation";
  }
  return "chat";
}

std::optional<StoreFlavor> parse_store_flavor(std::string_view s) {
  for (auto f : {StoreFlavor::Chat, StoreFlavor::Document, StoreFlavor::PeerConversation}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

std::vector<AnnotatedChunk> annotate(const HybridIndex& index, const std::vector<ScoredChunk>& ranking) {
  std::vector<AnnotatedChunk> out;
  out.reserve(ranking.size());
  for (const auto& sc : ranking) {
    const Chunk* c = index.find(sc.chunk_id);
    if (!c) continue;
    AnnotatedChunk ac;
    ac.scored = sc;
    ac.chunk = *c;
    ac.date_labels = extract_date_labels(c->text);
    out.push_back(std::move(ac));
  }
  return out;
}

EvidenceBundle execute_tier1(const UserProfile& profile, std::string_view) {
  if (profile.empty()) throw Error(Errc::EmptyProfile, "no profile facts to inject");
  EvidenceBundle b;
  b.tag = ActionTag::ProfileInjection;
  b.pinned = profile.render();
  return b;
}

EvidenceBundle execute_tier2(const TierInputs& in, std::string_view query) {
  EvidenceBundle b;
  b.tag = ActionTag::TargetedExtraction;
  const auto k = in.flavor == StoreFlavor::Document ? in.params.tier2_doc_top_k : in.params.tier2_top_k;
  b.episodic = annotate(in.index, multipass_retrieve(in.index, query, k, in.embedder, in.params));
  return b;
}

std::vector<AnnotatedChunk> chronological_sort(std::vector<AnnotatedChunk> chunks) {
  std::stable_sort(chunks.begin(), chunks.end(), [](const AnnotatedChunk& a, const AnnotatedChunk& b) {
    const auto& ta = a.chunk.session_timestamp;
    const auto& tb = b.chunk.session_timestamp;
    if (ta.has_value() != tb.has_value()) return ta.has_value();
    if (ta && *ta != *tb) return *ta < *tb;
    if (!ta && a.chunk.session_order != b.chunk.session_order) return a.chunk.session_order < b.chunk.session_order;
    return a.chunk.turn_span.first < b.chunk.turn_span.first;
  });
  return chunks;
}

namespace {

// Later-is-greater key used to pick the newest chunk of a group.
auto recency_key(const AnnotatedChunk& c) {
  return std::make_tuple(c.chunk.session_timestamp.has_value(),
                         c.chunk.session_timestamp.value_or(Timestamp{}), c.chunk.session_order,
                         c.chunk.turn_span.first);
}

std::string date_suffix(const Chunk& c) {
  return c.session_timestamp ? " (" + format_date(*c.session_timestamp) + ")" : "";
}

}  // namespace

std::vector<AnnotatedChunk> recency_filter(std::vector<AnnotatedChunk> chunks, std::string_view query) {
  auto query_terms = text::content_tokens(query);
  std::vector<std::set<std::string>> anchors(chunks.size());
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    for (const auto& a : extract_anchors(chunks[i].chunk.text)) anchors[i].insert(text::to_lower(a.text));
    for (const auto& t : query_terms) {
      if (text::contains_bounded(chunks[i].chunk.text, t)) anchors[i].insert(t);
    }
    for (const auto& a : anchors[i]) groups[a].push_back(i);
  }
  std::vector<bool> grouped(chunks.size(), false), newest_somewhere(chunks.size(), false);
  for (const auto& [anchor, members] : groups) {
    if (members.size() < 2) continue;
    std::size_t newest = members.front();
    for (auto m : members) {
      grouped[m] = true;
      if (recency_key(chunks[m]) > recency_key(chunks[newest])) newest = m;
    }
    newest_somewhere[newest] = true;
  }
  for (std::size_t i = 0; i < chunks.size(); ++i) chunks[i].stale_flag = grouped[i] && !newest_somewhere[i];
  return chronological_sort(std::move(chunks));
}

std::vector<ScoredChunk> round_robin_sessions(const HybridIndex& index, const std::vector<ScoredChunk>& ranking,
                                              std::size_t limit) {
  std::vector<std::string> session_order;
  std::map<std::string, std::vector<const ScoredChunk*>> queues;
  for (const auto& sc : ranking) {
    const Chunk* c = index.find(sc.chunk_id);
    if (!c) continue;
    auto [it, fresh] = queues.try_emplace(c->session_id);
    if (fresh) session_order.push_back(c->session_id);
    it->second.push_back(&sc);
  }
  std::vector<ScoredChunk> picked;
  std::map<std::string, std::size_t> cursor;
  bool progress = true;
  while (picked.size() < limit && progress) {
    progress = false;
    for (const auto& sid : session_order) {
      if (picked.size() >= limit) break;
      auto& pos = cursor[sid];
      const auto& q = queues[sid];
      if (pos < q.size()) {
        picked.push_back(*q[pos++]);
        progress = true;
      }
    }
  }
  return picked;
}

double sentence_relevance(std::string_view sentence, std::string_view query, const Embedder& embedder) {
  double dense = std::clamp(cosine(embedder.embed(sentence), embedder.embed(query)), 0.0, 1.0);
  auto q = text::content_tokens(query);
  double overlap = 0.0;
  if (!q.empty()) {
    auto toks = text::tokenize(sentence);
    std::set<std::string> s(toks.begin(), toks.end());
    std::size_t hit = 0;
    for (const auto& t : q) hit += s.count(t);
    overlap = static_cast<double>(hit) / static_cast<double>(q.size());
  }
  return (dense + overlap) / 2.0;
}

std::vector<std::size_t> top_sentences(const std::vector<std::string>& sentences, std::string_view query,
                                       const Embedder& embedder, std::size_t n) {
  std::vector<std::size_t> idx(sentences.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (sentences.size() <= n) return idx;
  std::vector<double> rel(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) rel[i] = sentence_relevance(sentences[i], query, embedder);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rel[a] > rel[b]; });
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Aggregate diverse_aggregate(const TierInputs& in, std::string_view query) {
  auto candidates = hybrid_rank(in.index, query, in.params.tier3_broad_top_k, in.embedder, in.params);
  auto picked = round_robin_sessions(in.index, candidates, in.params.tier3_top_k);
  Aggregate agg;
  agg.episodic = annotate(in.index, picked);

  // Map: shards of consecutive turns per session, top-2 sentences each.
  std::map<std::size_t, std::vector<const AnnotatedChunk*>> by_session;
  for (const auto& ac : agg.episodic) by_session[ac.chunk.session_order].push_back(&ac);
  std::vector<std::string> kept_shards;
  const std::size_t shard = std::max<std::size_t>(1, in.params.map_shard_turns);
  for (auto& [order, members] : by_session) {
    std::sort(members.begin(), members.end(), [](const AnnotatedChunk* a, const AnnotatedChunk* b) {
      return a->chunk.turn_span.first < b->chunk.turn_span.first;
    });
    std::vector<std::string> turns;
    double relevance = 0.0;
    for (const auto* m : members) {
      relevance = std::max(relevance, m->scored.score);
      for (const auto& line : text::split(m->chunk.text, '\n')) {
        if (!text::trim(line).empty()) turns.emplace_back(text::trim(line));
      }
    }
    std::vector<std::string> extracts;
    for (std::size_t s = 0; s < turns.size(); s += shard) {
      std::vector<std::string> sentences;
      for (std::size_t t = s; t < std::min(turns.size(), s + shard); ++t) {
        for (auto& sent : text::split_sentences(turns[t])) sentences.push_back(std::move(sent));
      }
      std::string reduced;
      for (auto i : top_sentences(sentences, query, in.embedder, 2)) {
        if (!reduced.empty()) reduced += ' ';
        reduced += sentences[i];
      }
      if (reduced.empty()) continue;
      // Reduce: drop near-duplicates of anything already kept.
      bool dup = std::any_of(kept_shards.begin(), kept_shards.end(),
                             [&](const std::string& k) { return text::jaccard(k, reduced) >= kDedupThreshold; });
      if (dup) continue;
      kept_shards.push_back(reduced);
      extracts.push_back(std::move(reduced));
    }
    if (extracts.empty()) continue;
    const Chunk& first = members.front()->chunk;
    agg.summaries.push_back(
        {first.session_id, "Session " + first.session_id + date_suffix(first), text::join(extracts, "\n"), relevance});
  }
  return agg;
}

std::vector<AnnotatedChunk> constraint_filter(std::vector<AnnotatedChunk> chunks) {
  static const std::vector<std::string> kModal = {"always",  "never",    "must",     "allowed",
                                                  "should not", "cannot", "required", "forbidden"};
  std::vector<AnnotatedChunk> kept;
  for (const auto& c : chunks) {
    if (std::any_of(kModal.begin(), kModal.end(),
                    [&](const std::string& m) { return text::contains_bounded(c.chunk.text, m); }))
      kept.push_back(c);
  }
  return kept.empty() ? chunks : kept;
}

std::vector<AnnotatedChunk> state_track_prepare(std::vector<AnnotatedChunk> chunks) {
  auto sorted = chronological_sort(dedup_jaccard(std::move(chunks)));
  for (auto& c : sorted) c.section_header = "Session " + c.chunk.session_id + date_suffix(c.chunk);
  return sorted;
}

EvidenceBundle execute_tier3(const TierInputs& in, std::string_view query, ActionTag tag) {
  EvidenceBundle b;
  b.tag = tag;
  auto multipass = [&] {
    return annotate(in.index, multipass_retrieve(in.index, query, in.params.tier3_top_k, in.embedder, in.params));
  };
  switch (tag) {
    case ActionTag::TemporalReasoning:
      b.episodic = chronological_sort(annotate(in.index, dual_anchor_retrieve(in.index, query, in.embedder, in.params)));
      b.order = EvidenceOrder::Chronological;
      break;
    case ActionTag::ConflictResolution:
      b.episodic = recency_filter(multipass(), query);
      b.order = EvidenceOrder::Chronological;
      break;
    case ActionTag::BroadSummarization: {
      auto agg = diverse_aggregate(in, query);
      b.summaries = std::move(agg.summaries);
      b.episodic = std::move(agg.episodic);
      break;
    }
    case ActionTag::ConstraintValidation: {
      b.episodic = constraint_filter(multipass());
      // Standing rules the user stated about themselves are pinned.
      UserProfile habits;
      for (const auto& f : in.store.profile.facts) {
        if (f.key == "habit") habits.facts.push_back(f);
      }
      b.pinned = habits.render();
      break;
    }
    case ActionTag::StateTracking:
      b.episodic = state_track_prepare(multipass());
      b.order = EvidenceOrder::Chronological;
      break;
    default:
      throw std::invalid_argument("execute_tier3 called with a non-Tier-3 tag");
  }
  return b;
}

EvidenceBundle build_evidence(const TierInputs& in, std::string_view query, ActionTag tag) {
  switch (tier_of(tag)) {
    case Tier::ProfileLookup:
      try {
        return execute_tier1(in.store.profile, query);
      } catch (const Error& e) {
        if (e.code() != Errc::EmptyProfile) throw;
        EvidenceBundle b;
        b.tag = tag;
        return b;
      }
    case Tier::TargetedRetrieval: {
      auto b = execute_tier2(in, query);
      b.tag = tag;
      return b;
    }
    case Tier::DeepReasoning:
      return execute_tier3(in, query, tag);
  }
  return {};
}

}  // namespace memflow
