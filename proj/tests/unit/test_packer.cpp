#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "memflow/error.hpp"
#include "memflow/packer.hpp"
#include "memflow/text.hpp"
#include "memflow/timeutil.hpp"

using namespace memflow;

namespace {

AnnotatedChunk ac(std::string id, std::string text, double score, std::string date = "2023-01-01") {
  AnnotatedChunk a;
  a.scored.chunk_id = id;
  a.scored.score = score;
  a.chunk.chunk_id = std::move(id);
  a.chunk.session_id = "s";
  a.chunk.session_timestamp = parse_timestamp(date);
  a.chunk.text = std::move(text);
  return a;
}

std::string words(std::mt19937& rng, int n) {
  static const std::vector<std::string> vocab = {"car", "gps", "job", "hike", "rule", "trip", "home", "bay",
                                                 "day", "week", "shop", "team", "desk", "note", "plan"};
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::string out;
  for (int i = 0; i < n; ++i) out += (i ? " " : "") + vocab[pick(rng)];
  return out;
}

const TokenCounter kCounter = TokenCounter::approximate();

}  // namespace

TEST(Budget, DefaultsFollowPerTagTable) {
  auto b = PackBudget::defaults();
  EXPECT_EQ(b.global_ceiling, 20480u);
  EXPECT_EQ(b.for_tag(ActionTag::ProfileInjection), (TagBudget{0, std::nullopt}));
  EXPECT_EQ(b.for_tag(ActionTag::TargetedExtraction), (TagBudget{6000, 300}));
  EXPECT_EQ(b.for_tag(ActionTag::TemporalReasoning), (TagBudget{4400, std::nullopt}));
  EXPECT_EQ(b.for_tag(ActionTag::ConflictResolution), (TagBudget{6000, std::nullopt}));
  EXPECT_EQ(b.for_tag(ActionTag::BroadSummarization), (TagBudget{8000, std::nullopt}));
  EXPECT_EQ(b.for_tag(ActionTag::ConstraintValidation), (TagBudget{6000, 200}));
  EXPECT_EQ(b.for_tag(ActionTag::StateTracking), (TagBudget{6000, 150}));
}

TEST(WordCap, TruncatesWithMarker) {
  EXPECT_EQ(apply_word_cap("a b  c d", 3), "a b  c ...");
  EXPECT_EQ(apply_word_cap("a b", 3), "a b");
  EXPECT_EQ(apply_word_cap("a b c d", std::nullopt), "a b c d");
}

TEST(Dedup, KeepsHigherScored) {
  std::vector<AnnotatedChunk> v = {ac("lo", "the gps in my car broke", 0.1), ac("x", "hiking at the bay", 0.5),
                                   ac("hi", "the gps in my car broke", 0.9)};
  auto out = dedup_jaccard(v);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].chunk.chunk_id, "x");
  EXPECT_EQ(out[1].chunk.chunk_id, "hi");
}

TEST(Refine, PrecisionTagsKeepTwoSentences) {
  HashingEmbedder emb;
  EvidenceBundle b;
  b.tag = ActionTag::TargetedExtraction;
  b.episodic = {ac("a", "Lunch was pasta. The GPS broke on Monday. It rained. The GPS module was replaced.", 1)};
  auto r = refine(b, "What happened to the GPS?", emb);
  EXPECT_EQ(r.episodic[0].chunk.text, "The GPS broke on Monday.\nThe GPS module was replaced.");
  b.tag = ActionTag::TemporalReasoning;
  EXPECT_EQ(refine(b, "What happened to the GPS?", emb), b);
  EXPECT_TRUE(is_precision_tag(ActionTag::StateTracking));
  EXPECT_FALSE(is_precision_tag(ActionTag::BroadSummarization));
}

TEST(Pack, RendersSectionsAndMarkers) {
  EvidenceBundle b;
  b.tag = ActionTag::ConflictResolution;
  b.order = EvidenceOrder::Chronological;
  b.pinned = "- occupation: I work at Globex";
  auto old_chunk = ac("s3#0", "data analyst at Acme", 0.9, "2023-04-10");
  old_chunk.stale_flag = true;
  auto new_chunk = ac("s4#0", "senior analyst at Globex", 0.5, "2023-06-05");
  b.episodic = {old_chunk, new_chunk};
  auto p = pack(b, PackBudget::defaults(), kCounter);
  EXPECT_NE(p.text.find(kProfileHeader), std::string::npos);
  EXPECT_NE(p.text.find("[OUTDATED] [s3#0 | 2023-04-10]"), std::string::npos);
  EXPECT_LT(p.text.find("s3#0"), p.text.find("s4#0"));
  EXPECT_EQ(p.included, (std::vector<std::string>{"s3#0", "s4#0"}));
  EXPECT_EQ(p.total_tokens, kCounter.count(p.text));
}

TEST(Pack, ScoreOrderForTargeted) {
  EvidenceBundle b;
  b.episodic = {ac("a", "alpha text", 0.1), ac("b", "bravo text", 0.9)};
  auto p = pack(b, PackBudget::defaults(), kCounter);
  EXPECT_EQ(p.included, (std::vector<std::string>{"b", "a"}));
}

TEST(Pack, PinnedOverflowThrows) {
  EvidenceBundle b;
  b.pinned = std::string(200, 'x');
  for (int i = 0; i < 200; ++i) b.pinned += " w";
  PackBudget budget = PackBudget::defaults();
  budget.global_ceiling = 50;
  try {
    pack(b, budget, kCounter);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PinnedOverflow);
  }
}

TEST(Pack, SummariesUseSlotLeftByEpisodicBudget) {
  std::mt19937 rng(3);
  EvidenceBundle b;
  b.tag = ActionTag::BroadSummarization;
  for (int i = 0; i < 10; ++i)
    b.summaries.push_back({"s" + std::to_string(i), "Session s" + std::to_string(i), words(rng, 30), 1.0 - i * 0.05});
  PackBudget budget = PackBudget::defaults();
  budget.global_ceiling = 8000 + 150;
  auto p = pack(b, budget, kCounter);
  // 150 units leave room for three 30-word summaries, most relevant first.
  std::size_t kept = std::count_if(b.summaries.begin(), b.summaries.end(), [&](const SummaryEntry& s) {
    return p.text.find(s.text) != std::string::npos;
  });
  EXPECT_GT(kept, 0u);
  EXPECT_LT(kept, 10u);
  EXPECT_NE(p.text.find(b.summaries[0].text), std::string::npos);
  EXPECT_EQ(std::count_if(p.dropped.begin(), p.dropped.end(), [](const std::string& d) { return d.starts_with("summary:"); }),
            static_cast<long>(10 - kept));
}

TEST(Pack, FuzzCeilingAndBookkeeping) {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> nchunks(0, 40), nwords(1, 400), tagpick(0, 6), ceil(200, 6000);
  std::uniform_real_distribution<double> score(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    EvidenceBundle b;
    b.tag = kAllTags[static_cast<std::size_t>(tagpick(rng))];
    b.order = trial % 2 ? EvidenceOrder::Chronological : EvidenceOrder::ScoreDescending;
    if (trial % 3 == 0) b.pinned = words(rng, 20);
    int n = nchunks(rng);
    std::set<std::string> all;
    for (int i = 0; i < n; ++i) {
      std::string id = "c" + std::to_string(i);
      all.insert(id);
      b.episodic.push_back(ac(id, words(rng, nwords(rng)), score(rng), "2023-0" + std::to_string(1 + i % 9) + "-01"));
    }
    if (trial % 4 == 0)
      for (int i = 0; i < 5; ++i) b.summaries.push_back({"m" + std::to_string(i), "Session m", words(rng, 40), score(rng)});
    PackBudget budget = PackBudget::defaults();
    budget.global_ceiling = static_cast<std::size_t>(ceil(rng));
    auto p = pack(b, budget, kCounter);
    ASSERT_LE(p.total_tokens, budget.global_ceiling) << "trial " << trial;
    EXPECT_EQ(p.total_tokens, p.text.empty() ? 0 : kCounter.count(p.text));
    std::set<std::string> seen;
    for (const auto& id : p.included) {
      EXPECT_TRUE(all.count(id));
      EXPECT_TRUE(seen.insert(id).second);
    }
    for (const auto& id : p.dropped) {
      if (!id.starts_with("summary:")) EXPECT_FALSE(std::count(p.included.begin(), p.included.end(), id));
    }
    std::set<std::string> accounted(p.included.begin(), p.included.end());
    for (const auto& id : p.dropped) accounted.insert(id);
    for (const auto& id : all) EXPECT_TRUE(accounted.count(id)) << id;
    if (!b.pinned.empty()) EXPECT_NE(p.text.find(b.pinned), std::string::npos);
    // Kept chunks are a score-order prefix of the deduplicated candidates.
    auto deduped = dedup_jaccard(b.episodic);
    double min_kept = 2, max_dropped = -1;
    for (const auto& c : deduped) {
      bool in = std::count(p.included.begin(), p.included.end(), c.chunk.chunk_id) > 0;
      if (in) min_kept = std::min(min_kept, c.scored.score);
      else max_dropped = std::max(max_dropped, c.scored.score);
    }
    EXPECT_GE(min_kept, max_dropped);
  }
}

TEST(PackPlain, ConcatenatesInRetrievalOrder) {
  EvidenceBundle b;
  b.episodic = {ac("a", "alpha", 0.1), ac("b", "bravo", 0.9)};
  auto p = pack_plain(b, PackBudget::defaults(), kCounter);
  EXPECT_EQ(p.text, "alpha\n\nbravo");
  EXPECT_EQ(p.included, (std::vector<std::string>{"a", "b"}));
}
