// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any gated criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/date_time/gregorian/gregorian.hpp>

#include "fixtures.hpp"
#include "memflow/answer.hpp"
#include "memflow/config.hpp"
#include "memflow/error.hpp"
#include "memflow/harness.hpp"
#include "memflow/packer.hpp"
#include "memflow/pipeline.hpp"
#include "memflow/prompts.hpp"
#include "memflow/retrieval.hpp"
#include "memflow/router.hpp"
#include "memflow/text.hpp"
#include "memflow/tools.hpp"
#include "memflow/validator.hpp"

using namespace memflow;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Check {
  Outcome outcome = Outcome::Pass;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      outcome = Outcome::Fail;
      if (notes.size() < 5) notes.push_back(what);
    }
  }
};

std::string str(std::size_t v) { return std::to_string(v); }

// ---------------------------------------------------------------- 1
Check routing_examples() {
  Check c;
  const std::pair<const char*, ActionTag> cases[] = {
      {"How many days passed between my marathon and my surgery?", ActionTag::TemporalReasoning},
      {"How long was I in Japan?", ActionTag::TargetedExtraction},
      {"What is my current job?", ActionTag::ConflictResolution},
      {"How many magazine subscriptions do I have?", ActionTag::BroadSummarization},
      {"What should I do when a customer complains?", ActionTag::ConstraintValidation},
      {"Any tips for keeping my kitchen clean?", ActionTag::ProfileInjection},
  };
  Router router(PromptLibrary::bundled().router());
  auto start = std::chrono::steady_clock::now();
  for (const auto& [q, tag] : cases) {
    auto r = router.route(q, nullptr);
    c.expect(r.decision.decided_by == DecidedBy::Rule, std::string(q) + " not decided by the rule layer");
    c.expect(r.decision.action_tag == tag, std::string(q) + " -> " + std::string(to_string(r.decision.action_tag)));
  }
  auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  c.expect(ms < 1000.0, "took " + std::to_string(ms) + " ms");
  return c;
}

// ---------------------------------------------------------------- 2
Check escalation_policy() {
  Check c;
  const std::map<ActionTag, ActionTag> table = {
      {ActionTag::ProfileInjection, ActionTag::TargetedExtraction},
      {ActionTag::TargetedExtraction, ActionTag::ConflictResolution},
      {ActionTag::TemporalReasoning, ActionTag::TargetedExtraction},
      {ActionTag::ConflictResolution, ActionTag::TargetedExtraction},
      {ActionTag::BroadSummarization, ActionTag::TargetedExtraction},
      {ActionTag::ConstraintValidation, ActionTag::TargetedExtraction},
      {ActionTag::StateTracking, ActionTag::ConflictResolution},
  };
  for (auto tag : kAllTags)
    c.expect(escalation_target(tag) == table.at(tag), "escalation_target(" + std::string(to_string(tag)) + ")");
  c.expect(kEscalationRetryCap == 1, "retry cap is not 1");

  auto world = fixtures::sample_world();
  auto pipeline = fixtures::default_pipeline();
  const char* queries[] = {"What car did I buy from the dealership?",
                           "How many days passed between buying my Civic and the GPS system failure?",
                           "What is my current job?",
                           "How many magazines do I subscribe to?",
                           "What should I do when a customer complains?",
                           "How has my job changed over time?",
                           "Any tips for writing a note to my new manager?"};
  for (const char* q : queries) {
    auto backend = std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Rule>{{"", "", {"ESCALATE_REQUIRED"}}});
    LlmGateway gw(backend);
    auto r = pipeline.answer_query(q, &world.store, &world.index, gw);
    c.expect(!r.short_circuited, std::string(q) + " short-circuited");
    c.expect(r.answer == kAbstention, std::string(q) + " answered '" + r.answer + "'");
    c.expect(r.passes.size() == 2, std::string(q) + " ran " + str(r.passes.size()) + " passes");
    c.expect(r.escalation_triggered && !r.is_escalated, std::string(q) + " escalation flags");
  }
  return c;
}

// ---------------------------------------------------------------- 3
Check packer_fuzz() {
  Check c;
  const auto counter = TokenCounter::approximate();
  std::mt19937 rng(20480);
  const std::vector<std::string> vocab = {"car", "gps",  "job",  "hike", "rule", "trip", "home", "bay",
                                          "day", "week", "shop", "team", "desk", "note", "plan", "2023-03-01"};
  auto words = [&](std::size_t n) {
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + vocab[pick(rng)];
    return s;
  };
  std::uniform_int_distribution<int> nchunks(0, 120), nwords(1, 900), tagpick(0, 6), pinned_words(0, 16000);
  std::uniform_real_distribution<double> score(0, 1);
  const auto budget = PackBudget::defaults();
  std::size_t overflowed = 0, saturated = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    EvidenceBundle b;
    b.tag = kAllTags[static_cast<std::size_t>(tagpick(rng))];
    b.order = trial % 2 ? EvidenceOrder::Chronological : EvidenceOrder::ScoreDescending;
    if (trial % 3 == 0) b.pinned = words(static_cast<std::size_t>(pinned_words(rng)));
    for (int i = 0, n = nchunks(rng); i < n; ++i) {
      AnnotatedChunk a;
      a.chunk.chunk_id = "c" + std::to_string(i);
      a.chunk.session_id = "s" + std::to_string(i % 7);
      a.chunk.text = words(static_cast<std::size_t>(nwords(rng)));
      a.scored = {a.chunk.chunk_id, score(rng), {"primary"}};
      if (i % 5 == 0) a.stale_flag = true;
      b.episodic.push_back(std::move(a));
    }
    if (trial % 4 == 0)
      for (int i = 0; i < 30; ++i) b.summaries.push_back({"m" + std::to_string(i), "Session m" + std::to_string(i), words(300), score(rng)});
    try {
      auto p = pack(b, budget, counter);
      c.expect(p.total_tokens <= kGlobalCeiling, "trial " + std::to_string(trial) + ": " + str(p.total_tokens) + " units");
      c.expect(p.total_tokens == (p.text.empty() ? 0 : counter.count(p.text)), "trial " + std::to_string(trial) + ": stale total");
      if (!b.pinned.empty())
        c.expect(p.text.find(b.pinned) != std::string::npos, "trial " + std::to_string(trial) + ": pinned text altered");
      if (p.total_tokens > kGlobalCeiling / 2) ++saturated;
    } catch (const Error& e) {
      c.expect(e.code() == Errc::PinnedOverflow, std::string("unexpected error ") + e.what());
      c.expect(counter.count(std::string(kProfileHeader) + "\n" + b.pinned) > kGlobalCeiling,
               "PinnedOverflow raised for a pinned section that fits");
      ++overflowed;
    }
  }
  // The generator must actually press against the ceiling.
  c.expect(saturated > 100, "only " + str(saturated) + " bundles filled half the ceiling");

  const std::map<ActionTag, TagBudget> budget_rows = {
      {ActionTag::ProfileInjection, {0, std::nullopt}},   {ActionTag::TargetedExtraction, {6000, 300}},
      {ActionTag::TemporalReasoning, {4400, std::nullopt}}, {ActionTag::ConflictResolution, {6000, std::nullopt}},
      {ActionTag::BroadSummarization, {8000, std::nullopt}}, {ActionTag::ConstraintValidation, {6000, 200}},
      {ActionTag::StateTracking, {6000, 150}},
  };
  c.expect(budget.global_ceiling == 20480, "global ceiling");
  for (const auto& [tag, row] : budget_rows)
    c.expect(budget.for_tag(tag) == row, "budget row " + std::string(to_string(tag)));
  // The word cap is what the packer applies.
  for (const auto& [tag, row] : budget_rows) {
    EvidenceBundle b;
    b.tag = tag;
    AnnotatedChunk a;
    a.chunk.chunk_id = "x";
    a.chunk.text = words(400);
    a.scored = {"x", 1.0, {}};
    b.episodic.push_back(a);
    auto p = pack(b, budget, counter);
    auto expected = apply_word_cap(a.chunk.text, row.word_cap);
    c.expect(p.text.find(expected) != std::string::npos, "word cap not applied for " + std::string(to_string(tag)));
    if (row.word_cap) c.expect(text::count_words(expected) == *row.word_cap + 1, "cap length " + std::string(to_string(tag)));
  }
  return c;
}

// ---------------------------------------------------------------- 4
Chunk doc(const std::string& id, const std::string& text) {
  Chunk ch;
  ch.chunk_id = id;
  ch.session_id = "s";
  ch.text = text;
  return ch;
}

std::map<std::string, double> bm25_oracle(const std::vector<Chunk>& docs, const std::vector<std::string>& query) {
  const double k1 = 1.5, b = 0.75, n = static_cast<double>(docs.size());
  std::vector<std::vector<std::string>> toks;
  double total = 0;
  for (const auto& d : docs) {
    std::istringstream in(d.text);
    std::vector<std::string> t;
    for (std::string w; in >> w;) t.push_back(w);
    total += static_cast<double>(t.size());
    toks.push_back(std::move(t));
  }
  std::set<std::string> terms(query.begin(), query.end());
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double s = 0;
    for (const auto& term : terms) {
      double df = 0;
      for (const auto& t : toks) df += std::find(t.begin(), t.end(), term) != t.end();
      double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), term));
      if (tf == 0) continue;
      s += std::log(1 + (n - df + 0.5) / (df + 0.5)) * tf * (k1 + 1) /
           (tf + k1 * (1 - b + b * static_cast<double>(toks[i].size()) / (total / n)));
    }
    if (s > 0) out[docs[i].chunk_id] = s;
  }
  return out;
}

// Same ids in the same order, with exact ties ordered by id.
bool same_ranking(const std::vector<ScoredChunk>& got, const std::map<std::string, double>& oracle) {
  if (got.size() != oracle.size()) return false;
  std::vector<std::pair<std::string, double>> want(oracle.begin(), oracle.end());
  std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
    if (std::abs(a.second - b.second) > 1e-12) return a.second > b.second;
    return a.first < b.first;
  });
  for (std::size_t i = 0; i < got.size(); ++i) {
    auto it = oracle.find(got[i].chunk_id);
    if (it == oracle.end() || std::abs(it->second - got[i].score) > 1e-9) return false;
    if (std::abs(want[i].second - got[i].score) > 1e-9) return false;
    if (got[i].chunk_id != want[i].first && std::abs(want[i].second - got[i].score) > 1e-12) return false;
  }
  return true;
}

Check retrieval_oracles() {
  Check c;
  HashingEmbedder emb(32);
  const std::vector<std::string> vocab = {"ta", "tb", "tc", "td", "te", "tf"};
  // Documents: every multiset of one or two terms over the first three words.
  std::vector<std::string> shapes;
  for (std::size_t i = 0; i < 3; ++i) {
    shapes.push_back(vocab[i]);
    for (std::size_t j = i; j < 3; ++j) shapes.push_back(vocab[i] + " " + vocab[j]);
  }
  // Queries: every non-empty subset of the six-term vocabulary.
  std::vector<std::vector<std::string>> queries;
  for (unsigned mask = 1; mask < 64; ++mask) {
    std::vector<std::string> q;
    for (unsigned t = 0; t < 6; ++t)
      if (mask & (1u << t)) q.push_back(vocab[t]);
    queries.push_back(std::move(q));
  }
  std::size_t compared = 0, mismatches = 0;
  auto check_corpus = [&](const std::vector<Chunk>& docs) {
    auto index = HybridIndex::build(docs, emb);
    for (const auto& q : queries) {
      auto got = bm25_rank(index, text::join(q, " "));
      ++compared;
      if (!same_ranking(got, bm25_oracle(docs, q))) ++mismatches;
    }
  };
  // Exhaustive over corpora of one to three documents.
  for (std::size_t n = 1; n <= 3; ++n) {
    std::vector<std::size_t> pick(n, 0);
    for (;;) {
      std::vector<Chunk> docs;
      for (std::size_t i = 0; i < n; ++i) docs.push_back(doc("d" + std::to_string(i), shapes[pick[i]]));
      check_corpus(docs);
      std::size_t k = 0;
      while (k < n && ++pick[k] == shapes.size()) pick[k++] = 0;
      if (k == n) break;
    }
  }
  // Five-document corpora over all six terms, sampled.
  std::mt19937 rng(4);
  std::uniform_int_distribution<std::size_t> term(0, 5), len(1, 6);
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<Chunk> docs;
    for (int d = 0; d < 5; ++d) {
      std::string t;
      for (std::size_t w = len(rng); w > 0; --w) t += (t.empty() ? "" : " ") + vocab[term(rng)];
      docs.push_back(doc("d" + std::to_string(d), t));
    }
    check_corpus(docs);
  }
  c.expect(mismatches == 0, str(mismatches) + " of " + str(compared) + " BM25 rankings differ");

  // RRF: every pair of orderings of up to five documents.
  std::vector<std::string> ids = {"d0", "d1", "d2", "d3", "d4"};
  std::size_t rrf_cases = 0, rrf_bad = 0;
  std::vector<std::vector<std::string>> perms;
  for (std::size_t len_a = 1; len_a <= 5; ++len_a) {
    std::vector<std::string> p(ids.begin(), ids.begin() + static_cast<long>(len_a));
    do perms.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
  }
  std::vector<std::vector<std::string>> short_perms;
  for (const auto& p : perms)
    if (p.size() <= 3) short_perms.push_back(p);
  for (const auto& a : perms) {
    for (const auto& b : short_perms) {
      std::vector<std::vector<std::string>> rankings = {a, b};
      std::map<std::string, double> oracle;
      for (const auto& r : rankings)
        for (std::size_t i = 0; i < r.size(); ++i) oracle[r[i]] += 1.0 / (60.0 + static_cast<double>(i + 1));
      ++rrf_cases;
      if (!same_ranking(rrf_fuse(rankings, 60.0), oracle)) ++rrf_bad;
    }
  }
  c.expect(rrf_bad == 0, str(rrf_bad) + " of " + str(rrf_cases) + " RRF fusions differ");
  return c;
}

// ---------------------------------------------------------------- 5
Check validator_cascade() {
  Check c;
  auto lib = PromptLibrary::bundled();
  Validator v(lib.validator(), lib.validator_user());
  const std::string ctx = "[s2#0 | 2023-03-22]\nThe GPS system in my Civic stopped working today.";
  auto backend = std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Rule>{{"", "", {"yes"}}});
  LlmGateway gw(backend);
  for (const char* a : {"", "   ", "ESCALATE_REQUIRED", "escalate_required.", "Escalate-Required"}) {
    auto verdict = v.validate(a, ctx, "q", &gw);
    c.expect(verdict.stage == VerdictStage::HardFailure && !verdict.grounded, std::string("'") + a + "' not a hard failure");
  }
  for (const char* a : {"5", "21 days"}) {
    auto verdict = v.validate(a, ctx, "q", &gw);
    c.expect(verdict.stage == VerdictStage::Passthrough && verdict.grounded, std::string("'") + a + "' not passed through");
  }
  c.expect(gw.call_count() == 0, "stages 1-2 made " + str(gw.call_count()) + " gateway calls");

  const std::string twenty = "The GPS system in your Civic stopped working on that day and you booked a service visit "
                             "at the dealership.";
  c.expect(text::count_words(twenty) == 20, "fixture answer is not 20 words");
  auto verdict = v.validate(twenty, ctx, "When did the GPS fail?", &gw);
  c.expect(gw.call_count() == 1, "20-word answer made " + str(gw.call_count()) + " calls");
  c.expect(verdict.stage == VerdictStage::LlmJudge, "20-word answer not judged");
  auto log = backend->requests();
  c.expect(!log.empty() && log.back().max_new_tokens == 8, "judge max_new_tokens is not 8");

  LlmGateway garbled(std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Rule>{{"", "", {"<think>hmm</think> perhaps"}}}));
  auto fb = v.validate(twenty, ctx, "q", &garbled);
  c.expect(fb.stage == VerdictStage::OverlapFallback, "unparseable judge reply did not fall back");
  auto expected = overlap_fallback(twenty, ctx, 0.07);
  c.expect(fb.grounded == expected.grounded, "fallback verdict differs from the tau=0.07 overlap check");
  auto low = v.validate("Penguins migrate across Antarctica every winter in enormous colonies seeking food near "
                        "open water and safety.",
                        ctx, "q", &garbled);
  c.expect(low.stage == VerdictStage::OverlapFallback && !low.grounded, "unrelated answer grounded by the fallback");
  return c;
}

// ---------------------------------------------------------------- 6
Check tool_protocol() {
  Check c;
  auto call = parse_tool_call("TOOL: days_between | 2023-03-01 | 2023-03-22");
  c.expect(call && call->name == "days_between" && call->args == std::vector<std::string>{"2023-03-01", "2023-03-22"},
           "days_between line not parsed");
  if (call) c.expect(execute_tool(*call, "").rendered == "TOOL_RESULT: 21", "days_between result");
  auto count = parse_tool_call("TOOL: count_occurrences | hiking");
  c.expect(count && count->args == std::vector<std::string>{"hiking"}, "count_occurrences line not parsed");
  if (count)
    c.expect(execute_tool(*count, "hiking, more hiking. Hiking again; concatenated hikings").value == "3",
             "count_occurrences result");
  c.expect(!parse_tool_call("TOOL: rm_rf | /").has_value(), "unknown tool parsed");
  c.expect(days_between("2023-03-01", "2023-03-22") == "21", "days_between(2023-03-01, 2023-03-22)");
  c.expect(days_between("2023-03-22", "2023-03-01") == "21", "days_between not symmetric");
  c.expect(months_between("2023-01-15", "2023-03-15") == "2", "months_between example");

  namespace greg = boost::gregorian;
  std::mt19937 rng(1000);
  std::uniform_int_distribution<int> offset(0, 365 * 80);
  const greg::date base(1970, 1, 1);
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    greg::date a = base + greg::days(offset(rng)), b = base + greg::days(offset(rng));
    auto sa = greg::to_iso_extended_string(a), sb = greg::to_iso_extended_string(b);
    long days = std::labs((b - a).days());
    greg::date lo = std::min(a, b), hi = std::max(a, b);
    long months = (hi.year() - lo.year()) * 12L + (hi.month() - lo.month()) - (hi.day() < lo.day() ? 1 : 0);
    if (days_between(sa, sb) != std::to_string(days) || weeks_between(sa, sb) != std::to_string(days / 7) ||
        months_between(sa, sb) != std::to_string(std::max(months, 0L)))
      ++bad;
  }
  c.expect(bad == 0, str(bad) + " of 1000 date pairs disagree with the calendar oracle");

  auto lib = PromptLibrary::bundled();
  auto req = render_prompt(lib, ActionTag::TemporalReasoning, "ctx", "How many days?", StoreFlavor::Chat);
  {
    LlmGateway gw(std::make_shared<ScriptedBackend>(
        std::vector<ScriptedBackend::Rule>{{"", "", {"TOOL: days_between | 2023-03-01 | 2023-03-22"}}}));
    auto d = generate(gw, req, "ctx", ActionTag::TemporalReasoning);
    c.expect(d.tool_rounds_used <= kMaxToolRounds && d.tool_rounds_used == 3, "tool rounds " + str(d.tool_rounds_used));
    c.expect(gw.call_count() == 4, "always-tool script made " + str(gw.call_count()) + " calls");
  }
  {
    LlmGateway gw(std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Rule>{{"", "", {"TOOL: rm_rf | /"}}}));
    auto d = generate(gw, req, "ctx", ActionTag::TemporalReasoning);
    c.expect(d.tool_calls.empty() && gw.call_count() == 1, "unknown tool was executed");
  }
  return c;
}

// ---------------------------------------------------------------- 7
Check control_flow() {
  Check c;
  auto world = fixtures::sample_world();
  auto pipeline = fixtures::default_pipeline();
  auto ask = [&](const std::string& q) {
    LlmGateway gw(std::make_shared<ScriptedBackend>(fixtures::synthetic_script()));
    auto r = pipeline.answer_query(q, &world.store, &world.index, gw);
    return std::make_pair(r, gw.call_count());
  };
  auto [sc, sc_calls] = ask("Which magazines: Wired, The Atlantic, National Geographic?");
  c.expect(sc.short_circuited && sc_calls == 0 && sc.slm_call_count == 0, "short-circuit path made calls");

  for (const auto& item : fixtures::synthetic_benchmark_json()) {
    auto q = item["question"].get<std::string>();
    auto [r, calls] = ask(q);
    c.expect(r.slm_call_count == calls, q + ": trace counts " + str(r.slm_call_count) + " calls, gateway saw " + str(calls));
    if (r.short_circuited) continue;
    c.expect(r.stage_slm_calls <= 4, q + ": " + str(r.stage_slm_calls) + " stage-level calls");
    if (!r.escalation_triggered) c.expect(!r.is_escalated, q + ": escalated without a retry");
  }
  auto [esc, esc_calls] = ask("Where do I work right now?");
  c.expect(esc.escalation_triggered && esc.is_escalated, "escalated path flags");
  c.expect(esc.answer == "You work at Globex as a senior analyst.", "escalated answer '" + esc.answer + "'");
  auto [kept, kept_calls] = ask("What is the name of my dentist?");
  c.expect(kept.escalation_triggered && !kept.is_escalated, "rejected retry marked as escalated");

  for (const auto& item : fixtures::synthetic_benchmark_json()) {
    auto q = item["question"].get<std::string>();
    auto a = ask(q).first, b = ask(q).first;
    c.expect(to_json(a).dump() == to_json(b).dump(), q + ": results differ across runs");
  }
  return c;
}

// ---------------------------------------------------------------- 8 and 9
struct BenchRuns {
  std::vector<std::pair<std::string, BenchReport>> reports;
};

const BenchRuns& bench_runs() {
  static const BenchRuns runs = [] {
    BenchRuns out;
    auto bench = parse_benchmark(fixtures::synthetic_benchmark_json(), BenchFormat::Generic);
    const std::vector<std::string> configs = {"default", "none", "uniform_rag", "no_router", "no_tools",
                                              "no_validator", "no_packer", "no_retrieval_strategy"};
    for (const auto& name : configs) {
      PipelineConfig cfg;
      if (name != "default") cfg.ablations = Ablations::parse(name);
      auto pipeline = fixtures::default_pipeline(cfg);
      LlmGateway gw(std::make_shared<ScriptedBackend>(fixtures::synthetic_script()));
      out.reports.emplace_back(name, run_bench(bench, pipeline, gw, nullptr));
    }
    return out;
  }();
  return runs;
}

std::string records_dump(const BenchReport& r) {
  std::string s;
  for (const auto& rec : r.records) s += to_json(rec).dump() + "\n";
  return s + r.summary.dump();
}

Check ablations() {
  Check c;
  const auto& runs = bench_runs();
  for (const auto& [name, rep] : runs.reports) {
    c.expect(rep.records.size() == 20, name + ": " + str(rep.records.size()) + " records");
    for (const auto& rec : rep.records) {
      c.expect(!rec.error, name + "/" + rec.question_id + ": " + rec.error.value_or(""));
      try {
        c.expect(eval_record_from_json(to_json(rec)) == rec, name + "/" + rec.question_id + ": record round trip");
      } catch (const std::exception& e) {
        c.expect(false, name + "/" + rec.question_id + ": " + e.what());
      }
    }
    if (name != "default" && name != "none")
      c.expect(rep.summary["ablations"] == nlohmann::json::array({name}), name + ": flag not echoed in summary");
  }
  c.expect(records_dump(runs.reports[0].second) == records_dump(runs.reports[1].second),
           "all-false configuration differs from the default pipeline");
  return c;
}

Check trace_accounting() {
  Check c;
  std::size_t runs_checked = 0;
  for (const auto& [name, rep] : bench_runs().reports) {
    for (const auto& r : rep.results) {
      std::size_t sum = 0;
      for (const auto& s : r.stage_traces) sum += s.tokens();
      ++runs_checked;
      c.expect(sum == r.total_tokens - r.fixed_wrapper_tokens,
               name + ": stage sum " + str(sum) + " != " + str(r.total_tokens) + " - " + str(r.fixed_wrapper_tokens));
    }
    double adopted = rep.summary["escalation_adopted_rate"].get<double>();
    double triggered = rep.summary["escalation_triggered_rate"].get<double>();
    c.expect(adopted <= triggered, name + ": adopted rate above triggered rate");
  }
  c.expect(runs_checked >= 160, "only " + str(runs_checked) + " runs checked");
  return c;
}

// ---------------------------------------------------------------- 10
Check live_check() {
  Check c;
  const char* backend = std::getenv("MEMFLOW_LIVE_BACKEND");
  const char* bench_path = std::getenv("MEMFLOW_LIVE_LONGMEMEVAL");
  if (!backend || !bench_path) {
    c.outcome = Outcome::Skip;
    c.notes.push_back("set MEMFLOW_LIVE_BACKEND, MEMFLOW_LIVE_LONGMEMEVAL and optionally MEMFLOW_LIVE_TOKENIZER");
    return c;
  }
  AppConfig cfg;
  if (const char* model = std::getenv("MEMFLOW_LIVE_MODEL")) cfg.backend_model = model;
  if (const char* tok = std::getenv("MEMFLOW_LIVE_TOKENIZER")) cfg.token_counter = tok;
  try {
    auto bench = load_benchmark(bench_path, BenchFormat::LongMemEval);
    std::sort(bench.items.begin(), bench.items.end(),
              [](const BenchItem& a, const BenchItem& b) { return a.question_id < b.question_id; });
    if (bench.items.size() > 25) bench.items.resize(25);
    LlmGateway gw(make_backend(backend, cfg.backend_model, cfg), make_counter(cfg));
    auto pipeline = fixtures::default_pipeline();
    auto rep = run_bench(bench, pipeline, gw, nullptr);
    std::size_t errors = 0;
    for (const auto& r : rep.records) errors += r.error.has_value();
    double mean = rep.summary["mean_packed_tokens"].get<double>();
    c.expect(errors == 0, str(errors) + " items failed");
    c.expect(mean >= 154.3 && mean <= 15430.0, "mean packed tokens " + std::to_string(mean));
    c.notes.push_back("mean packed tokens " + std::to_string(mean));
  } catch (const std::exception& e) {
    c.expect(false, e.what());
  }
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"1 rule-layer routing of the six disambiguation questions", routing_examples},
      {"2 escalation map and single retry under an always-escalating backend", escalation_policy},
      {"3 packer fuzz (1,000 bundles) and per-tag budget table", packer_fuzz},
      {"4 BM25 and RRF agree with brute-force oracles", retrieval_oracles},
      {"5 validator cascade stages and call counts", validator_cascade},
      {"6 tool protocol, calendar oracle and bounded tool loop", tool_protocol},
      {"7 pipeline control flow and determinism", control_flow},
      {"8 ablation configurations on the 20-item synthetic benchmark", ablations},
      {"9 trace token accounting and escalation rates", trace_accounting},
      {"10 live endpoint check (not CI-gated)", live_check},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.outcome = Outcome::Fail;
      c.notes.push_back(std::string("threw: ") + e.what());
    }
    const char* label = c.outcome == Outcome::Pass ? "PASS" : c.outcome == Outcome::Fail ? "FAIL" : "SKIP";
    std::cout << label << "  criterion " << name;
    if (!c.notes.empty()) {
      std::cout << "  (";
      for (std::size_t i = 0; i < c.notes.size(); ++i) std::cout << (i ? "; " : "") << c.notes[i];
      std::cout << ")";
    }
    std::cout << std::endl;
    if (c.outcome == Outcome::Fail) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
