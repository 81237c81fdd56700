#include "memflow/packer.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "memflow/error.hpp"
#include "memflow/text.hpp"
#include "memflow/timeutil.hpp"

namespace memflow {

PackBudget PackBudget::defaults() {
  PackBudget b;
  b.per_tag = {
      {ActionTag::ProfileInjection, {0, std::nullopt}},
      {ActionTag::TargetedExtraction, {6000, 300}},
      {ActionTag::TemporalReasoning, {4400, std::nullopt}},
      {ActionTag::ConflictResolution, {6000, std::nullopt}},
      {ActionTag::BroadSummarization, {8000, std::nullopt}},
      {ActionTag::ConstraintValidation, {6000, 200}},
      {ActionTag::StateTracking, {6000, 150}},
  };
  return b;
}

const TagBudget& PackBudget::for_tag(ActionTag tag) const {
  auto it = per_tag.find(tag);
  if (it == per_tag.end()) throw std::out_of_range("no budget for tag " + std::string(to_string(tag)));
  return it->second;
}

std::vector<AnnotatedChunk> dedup_jaccard(std::vector<AnnotatedChunk> chunks, double threshold) {
  std::vector<std::size_t> order(chunks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return chunks[a].scored.score > chunks[b].scored.score; });
  std::vector<bool> keep(chunks.size(), false);
  std::vector<std::size_t> kept;
  for (auto i : order) {
    bool dup = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return text::jaccard(chunks[k].chunk.text, chunks[i].chunk.text) >= threshold;
    });
    if (dup) continue;
    keep[i] = true;
    kept.push_back(i);
  }
  std::vector<AnnotatedChunk> out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (keep[i]) out.push_back(std::move(chunks[i]));
  }
  return out;
}

std::string sentence_extract(std::string_view chunk_text, std::string_view query, const Embedder& embedder) {
  auto sentences = text::split_sentences(chunk_text);
  if (sentences.size() <= 1) return std::string(chunk_text);
  std::vector<std::string> picked;
  for (auto i : top_sentences(sentences, query, embedder, 2)) picked.push_back(sentences[i]);
  return text::join(picked, "\n");
}

std::string apply_word_cap(std::string_view s, std::optional<std::size_t> cap_words) {
  if (!cap_words) return std::string(s);
  auto words = text::split_words(s);
  if (words.size() <= *cap_words) return std::string(s);
  // Keep the original spacing up to the end of the last retained word.
  const auto& last = words[*cap_words - 1];
  auto end = static_cast<std::size_t>(last.data() + last.size() - s.data());
  return std::string(s.substr(0, end)) + std::string(kWordCapMarker);
}

bool is_precision_tag(ActionTag tag) {
  return tag == ActionTag::TargetedExtraction || tag == ActionTag::ConstraintValidation ||
         tag == ActionTag::StateTracking;
}

EvidenceBundle refine(EvidenceBundle bundle, std::string_view query, const Embedder& embedder) {
  if (!is_precision_tag(bundle.tag)) return bundle;
  for (auto& c : bundle.episodic) c.chunk.text = sentence_extract(c.chunk.text, query, embedder);
  return bundle;
}

namespace {

std::string render_chunk(const AnnotatedChunk& c, const std::string* previous_header) {
  std::string out;
  if (!c.section_header.empty() && (!previous_header || *previous_header != c.section_header))
    out += "-- " + c.section_header + " --\n";
  if (c.stale_flag) out += "[OUTDATED] ";
  out += "[" + c.chunk.chunk_id;
  if (c.chunk.session_timestamp) out += " | " + format_date(*c.chunk.session_timestamp);
  out += "]";
  if (!c.date_labels.empty()) out += " dates: " + text::join(c.date_labels, ", ");
  out += "\n";
  out += c.chunk.text;
  return out;
}

std::string render_summary(const SummaryEntry& s) { return s.header + "\n" + s.text; }

struct Layout {
  std::vector<const SummaryEntry*> summaries;
  std::vector<const AnnotatedChunk*> episodic;  // render order
};

PackedContext render(const EvidenceBundle& bundle, const Layout& layout, const TokenCounter& counter) {
  PackedContext out;
  std::vector<std::string> blocks;
  if (!bundle.pinned.empty()) {
    std::string body = std::string(kProfileHeader) + "\n" + bundle.pinned;
    out.sections.push_back({"pinned", body, counter.count(body)});
    blocks.push_back(std::move(body));
  }
  if (!layout.summaries.empty()) {
    std::vector<std::string> parts;
    for (const auto* s : layout.summaries) parts.push_back(render_summary(*s));
    std::string body = std::string(kSummaryHeader) + "\n" + text::join(parts, "\n\n");
    out.sections.push_back({"summaries", body, counter.count(body)});
    blocks.push_back(std::move(body));
  }
  if (!layout.episodic.empty()) {
    std::vector<std::string> parts;
    const std::string* prev = nullptr;
    for (const auto* c : layout.episodic) {
      parts.push_back(render_chunk(*c, prev));
      prev = &c->section_header;
      out.included.push_back(c->chunk.chunk_id);
    }
    std::string body = std::string(kEvidenceHeader) + "\n" + text::join(parts, "\n\n");
    out.sections.push_back({"episodic", body, counter.count(body)});
    blocks.push_back(std::move(body));
  }
  out.text = text::join(blocks, "\n\n");
  out.total_tokens = out.text.empty() ? 0 : counter.count(out.text);
  return out;
}

}  // namespace

PackedContext pack(const EvidenceBundle& bundle, const PackBudget& budget, const TokenCounter& counter) {
  const std::size_t ceiling = budget.global_ceiling;
  const TagBudget& tag_budget = budget.for_tag(bundle.tag);

  std::size_t pinned_units = 0;
  if (!bundle.pinned.empty()) {
    pinned_units = counter.count(std::string(kProfileHeader) + "\n" + bundle.pinned);
    if (pinned_units > ceiling)
      throw Error(Errc::PinnedOverflow, "pinned section needs " + std::to_string(pinned_units) +
                                            " units, ceiling is " + std::to_string(ceiling));
  }

  Layout layout;
  std::vector<std::string> dropped;

  // Summaries get what the episodic slot and pinned facts leave over; the
  // least relevant entries go first.
  const std::size_t reserved = pinned_units + tag_budget.tier2_budget;
  const std::size_t summary_slot = reserved >= ceiling ? 0 : ceiling - reserved;
  std::vector<const SummaryEntry*> summaries;
  for (const auto& s : bundle.summaries) summaries.push_back(&s);
  std::stable_sort(summaries.begin(), summaries.end(),
                   [](const SummaryEntry* a, const SummaryEntry* b) { return a->relevance > b->relevance; });
  std::size_t summary_used = 0;
  const std::size_t summary_header = counter.count(kSummaryHeader);
  bool summaries_open = true;
  for (const auto* s : summaries) {
    std::size_t cost = counter.count(render_summary(*s)) + (layout.summaries.empty() ? summary_header : 0);
    if (summaries_open && summary_used + cost <= summary_slot) {
      layout.summaries.push_back(s);
      summary_used += cost;
    } else {
      summaries_open = false;
      dropped.push_back("summary:" + s->session_id);
    }
  }

  // Episodic slot: everything not consumed above.
  const std::size_t episodic_budget = ceiling - pinned_units - summary_used;
  std::vector<AnnotatedChunk> capped;
  {
    std::vector<std::string> before;
    for (const auto& c : bundle.episodic) before.push_back(c.chunk.chunk_id);
    capped = dedup_jaccard(bundle.episodic);
    for (const auto& id : before) {
      if (std::none_of(capped.begin(), capped.end(), [&](const AnnotatedChunk& c) { return c.chunk.chunk_id == id; }))
        dropped.push_back(id);
    }
  }
  for (auto& c : capped) c.chunk.text = apply_word_cap(c.chunk.text, tag_budget.word_cap);

  std::vector<std::size_t> by_score(capped.size());
  std::iota(by_score.begin(), by_score.end(), 0);
  std::stable_sort(by_score.begin(), by_score.end(), [&](std::size_t a, std::size_t b) {
    if (capped[a].scored.score != capped[b].scored.score) return capped[a].scored.score > capped[b].scored.score;
    return capped[a].chunk.chunk_id < capped[b].chunk.chunk_id;
  });
  std::vector<bool> take(capped.size(), false);
  std::vector<std::size_t> taken_by_score;
  std::size_t episodic_used = 0;
  const std::size_t evidence_header = counter.count(kEvidenceHeader);
  bool episodic_open = true;
  for (auto i : by_score) {
    // Header lines are charged to every chunk: an upper bound on render cost.
    std::size_t cost = counter.count(render_chunk(capped[i], nullptr)) + (taken_by_score.empty() ? evidence_header : 0);
    if (episodic_open && episodic_used + cost <= episodic_budget) {
      take[i] = true;
      taken_by_score.push_back(i);
      episodic_used += cost;
    } else {
      episodic_open = false;
      dropped.push_back(capped[i].chunk.chunk_id);
    }
  }
  if (bundle.order == EvidenceOrder::Chronological) {
    for (std::size_t i = 0; i < capped.size(); ++i) {
      if (take[i]) layout.episodic.push_back(&capped[i]);
    }
  } else {
    for (auto i : taken_by_score) layout.episodic.push_back(&capped[i]);
  }

  auto out = render(bundle, layout, counter);
  // Exact tokenizers need not be additive; trim until the whole fits.
  while (out.total_tokens > ceiling && (!layout.episodic.empty() || !layout.summaries.empty())) {
    if (!layout.episodic.empty()) {
      auto lowest = std::min_element(layout.episodic.begin(), layout.episodic.end(),
                                     [](const AnnotatedChunk* a, const AnnotatedChunk* b) {
                                       if (a->scored.score != b->scored.score) return a->scored.score < b->scored.score;
                                       return a->chunk.chunk_id > b->chunk.chunk_id;
                                     });
      dropped.push_back((*lowest)->chunk.chunk_id);
      layout.episodic.erase(lowest);
    } else {
      dropped.push_back("summary:" + layout.summaries.back()->session_id);
      layout.summaries.pop_back();
    }
    out = render(bundle, layout, counter);
  }
  if (out.total_tokens > ceiling)
    throw Error(Errc::PinnedOverflow, "pinned section does not fit under the ceiling once rendered");
  out.dropped = std::move(dropped);
  return out;
}

PackedContext pack_plain(const EvidenceBundle& bundle, const PackBudget& budget, const TokenCounter& counter) {
  std::vector<std::pair<std::string, std::string>> pieces;  // (id, text)
  if (!bundle.pinned.empty()) pieces.emplace_back("", bundle.pinned);
  for (const auto& s : bundle.summaries) pieces.emplace_back("summary:" + s.session_id, s.text);
  for (const auto& c : bundle.episodic) pieces.emplace_back(c.chunk.chunk_id, c.chunk.text);

  PackedContext out;
  std::string text;
  for (const auto& [id, piece] : pieces) {
    std::string next = text.empty() ? piece : text + "\n\n" + piece;
    if (counter.count(next) > budget.global_ceiling) {
      if (!id.empty()) out.dropped.push_back(id);
      continue;
    }
    text = std::move(next);
    if (!id.empty() && !id.starts_with("summary:")) out.included.push_back(id);
  }
  out.total_tokens = text.empty() ? 0 : counter.count(text);
  if (!text.empty()) out.sections.push_back({"plain", text, out.total_tokens});
  out.text = std::move(text);
  return out;
}

}  // namespace memflow
