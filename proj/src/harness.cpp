#include "memflow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "memflow/error.hpp"
#include "memflow/text.hpp"
#include "memflow/timeutil.hpp"

namespace memflow {

using nlohmann::json;

std::string_view to_string(BenchFormat f) {
  switch (f) {
    case BenchFormat::Generic: return "generic";
    case BenchFormat::LongMemEval: return "longmemeval";
    case BenchFormat::LoCoMo: return "locomo";
    case BenchFormat::LongBench: return "longbench";
  }
  return "generic";
}

BenchFormat parse_bench_format(std::string_view s) {
  for (auto f : {BenchFormat::Generic, BenchFormat::LongMemEval, BenchFormat::LoCoMo, BenchFormat::LongBench}) {
    if (to_string(f) == s) return f;
  }
  throw Error(Errc::UnknownFormat, "unknown benchmark format '" + std::string(s) + "'");
}

namespace {

[[noreturn]] void schema(const std::string& where, const std::string& what) {
  throw Error(Errc::SchemaError, where + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) schema(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) schema(where + "." + key, "missing");
  return *it;
}

std::string str_field(const json& obj, const std::string& key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  schema(where + "." + key, "expected a string");
}

// Answers can be strings, numbers or lists of alternatives.
std::string answer_text(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  if (v.is_array() && !v.empty()) {
    std::vector<std::string> parts;
    for (const auto& a : v) parts.push_back(answer_text(a, where));
    return text::join(parts, "; ");
  }
  schema(where, "expected an answer string");
}

ConversationHistory history_from_records(const json& sessions, const std::string& where, const std::string& label) {
  try {
    return ingest_history(sessions, label);
  } catch (const Error& e) {
    schema(where, e.what());
  }
}

Benchmark load_generic(const json& doc) {
  Benchmark b;
  if (!doc.is_array()) schema("$", "expected an array of items");
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "$[" + std::to_string(i) + "]";
    const auto& item = doc[i];
    BenchItem bi;
    bi.question_id = str_field(item, "question_id", where);
    bi.question = str_field(item, "question", where);
    bi.gold_answer = answer_text(field(item, "answer", where), where + ".answer");
    bi.question_type = item.contains("question_type") ? str_field(item, "question_type", where) : "generic";
    bi.history = b.histories.size();
    b.histories.push_back(history_from_records(field(item, "sessions", where), where + ".sessions", bi.question_id));
    b.items.push_back(std::move(bi));
  }
  return b;
}

Benchmark load_longmemeval(const json& doc) {
  Benchmark b;
  if (!doc.is_array()) schema("$", "expected an array of items");
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "$[" + std::to_string(i) + "]";
    const auto& item = doc[i];
    BenchItem bi;
    bi.question_id = str_field(item, "question_id", where);
    bi.question = str_field(item, "question", where);
    bi.gold_answer = answer_text(field(item, "answer", where), where + ".answer");
    bi.question_type = item.contains("question_type") ? str_field(item, "question_type", where) : "unknown";
    const auto& sessions = field(item, "haystack_sessions", where);
    const auto& dates = field(item, "haystack_dates", where);
    if (!sessions.is_array() || !dates.is_array() || sessions.size() != dates.size())
      schema(where + ".haystack_sessions", "sessions and dates must be arrays of equal length");
    json ids = item.contains("haystack_session_ids") ? item.at("haystack_session_ids") : json::array();
    json records = json::array();
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      const std::string swhere = where + ".haystack_sessions[" + std::to_string(s) + "]";
      json turns = json::array();
      for (const auto& t : sessions[s]) {
        auto content = t.contains("content") ? t.at("content") : field(t, "text", swhere);
        if (!content.is_string() || text::trim(content.get<std::string>()).empty()) continue;
        turns.push_back({{"role", str_field(t, "role", swhere)}, {"text", content}});
      }
      if (turns.empty()) continue;
      std::string sid = s < ids.size() && ids[s].is_string() ? ids[s].get<std::string>() : "s" + std::to_string(s);
      records.push_back({{"session_id", sid}, {"timestamp", dates[s]}, {"turns", turns}});
    }
    bi.history = b.histories.size();
    b.histories.push_back(history_from_records(records, where, bi.question_id));
    b.items.push_back(std::move(bi));
  }
  return b;
}

Benchmark load_locomo(const json& doc) {
  Benchmark b;
  b.flavor = StoreFlavor::PeerConversation;
  if (!doc.is_array()) schema("$", "expected an array of samples");
  static const std::regex kSessionKey(R"(^session_(\d+)$)");
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "$[" + std::to_string(i) + "]";
    const auto& sample = doc[i];
    const std::string sample_id = sample.contains("sample_id") ? str_field(sample, "sample_id", where) : "conv" + std::to_string(i);
    const auto& conv = field(sample, "conversation", where);
    std::vector<std::pair<int, std::string>> keys;
    for (const auto& [k, v] : conv.items()) {
      std::smatch m;
      if (std::regex_match(k, m, kSessionKey)) keys.emplace_back(std::stoi(m[1].str()), k);
    }
    std::sort(keys.begin(), keys.end());
    json records = json::array();
    for (const auto& [n, key] : keys) {
      const std::string swhere = where + ".conversation." + key;
      json turns = json::array();
      for (const auto& t : conv.at(key)) turns.push_back({{"role", str_field(t, "speaker", swhere)}, {"text", str_field(t, "text", swhere)}});
      if (turns.empty()) continue;
      records.push_back({{"session_id", key}, {"timestamp", str_field(conv, key + "_date_time", where + ".conversation")}, {"turns", turns}});
    }
    const auto history = b.histories.size();
    b.histories.push_back(history_from_records(records, where + ".conversation", sample_id));
    const auto& qa = field(sample, "qa", where);
    for (std::size_t q = 0; q < qa.size(); ++q) {
      const std::string qwhere = where + ".qa[" + std::to_string(q) + "]";
      // Adversarial items carry no gold answer; they are not scored.
      if (!qa[q].contains("answer")) continue;
      BenchItem bi;
      bi.question_id = sample_id + "_q" + std::to_string(q);
      bi.question = str_field(qa[q], "question", qwhere);
      bi.gold_answer = answer_text(qa[q].at("answer"), qwhere + ".answer");
      bi.question_type = qa[q].contains("category") ? "category_" + str_field(qa[q], "category", qwhere) : "unknown";
      bi.history = history;
      b.items.push_back(std::move(bi));
    }
  }
  return b;
}

// Paragraphs of at most ~200 words become document turns.
std::vector<std::string> document_passages(std::string_view doc) {
  std::vector<std::string> out;
  std::string current;
  std::size_t words = 0;
  auto flush = [&] {
    if (!text::trim(current).empty()) out.emplace_back(text::trim(current));
    current.clear();
    words = 0;
  };
  for (const auto& line : text::split(doc, '\n')) {
    if (text::trim(line).empty()) {
      flush();
      continue;
    }
    for (auto w : text::split_words(line)) {
      if (words >= 200) flush();
      if (!current.empty()) current += ' ';
      current += w;
      ++words;
    }
  }
  flush();
  return out;
}

Benchmark load_longbench(const json& doc) {
  Benchmark b;
  b.flavor = StoreFlavor::Document;
  if (!doc.is_array()) schema("$", "expected an array of items");
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "$[" + std::to_string(i) + "]";
    const auto& item = doc[i];
    BenchItem bi;
    bi.question_id = item.contains("_id") ? str_field(item, "_id", where) : str_field(item, "question_id", where);
    bi.question = item.contains("input") ? str_field(item, "input", where) : str_field(item, "question", where);
    bi.gold_answer = answer_text(item.contains("answers") ? item.at("answers") : field(item, "answer", where), where + ".answers");
    bi.question_type = item.contains("dataset") ? str_field(item, "dataset", where) : "longbench";
    Session s;
    s.session_id = "doc";
    for (auto& p : document_passages(str_field(item, "context", where)))
      s.turns.push_back({"document", std::move(p), s.turns.size()});
    if (s.turns.empty()) schema(where + ".context", "empty document");
    ConversationHistory h;
    h.source_label = bi.question_id;
    h.sessions.push_back(std::move(s));
    bi.history = b.histories.size();
    b.histories.push_back(std::move(h));
    b.items.push_back(std::move(bi));
  }
  return b;
}

}  // namespace

Benchmark parse_benchmark(const json& doc, BenchFormat format) {
  switch (format) {
    case BenchFormat::Generic: return load_generic(doc);
    case BenchFormat::LongMemEval: return load_longmemeval(doc);
    case BenchFormat::LoCoMo: return load_locomo(doc);
    case BenchFormat::LongBench: return load_longbench(doc);
  }
  throw Error(Errc::UnknownFormat, "unknown benchmark format");
}

Benchmark load_benchmark(const std::filesystem::path& path, BenchFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string body = ss.str();
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) {
    // JSON Lines: one item per line.
    doc = json::array();
    std::size_t line_no = 0;
    for (const auto& line : text::split(body, '\n')) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw Error(Errc::SchemaError, path.string() + ": line " + std::to_string(line_no) + ": invalid JSON");
      doc.push_back(std::move(j));
    }
  }
  try {
    return parse_benchmark(doc, format);
  } catch (const Error& e) {
    if (e.code() != Errc::SchemaError) throw;
    throw Error(Errc::SchemaError, path.string() + ": " + e.what());
  }
}

bool overlap_correct(std::string_view gold, std::string_view predicted) {
  auto g = text::content_tokens(gold);
  if (g.empty()) {
    auto all = text::tokenize(gold);
    g.insert(all.begin(), all.end());
  }
  if (g.empty()) return text::to_lower(text::trim(gold)) == text::to_lower(text::trim(predicted));
  auto p_tokens = text::tokenize(predicted);
  std::set<std::string> p(p_tokens.begin(), p_tokens.end());
  std::size_t hit = 0;
  for (const auto& t : g) hit += p.count(t);
  return 2 * hit >= g.size();
}

std::optional<bool> parse_correct_json(std::string_view reply) {
  static const std::regex kCorrect(R"re("correct"\s*:\s*(true|false))re", std::regex::icase);
  std::string s(reply);
  auto open = s.find('{');
  auto close = s.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    auto j = json::parse(s.substr(open, close - open + 1), nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("correct") && j["correct"].is_boolean())
      return j["correct"].get<bool>();
  }
  std::smatch m;
  if (std::regex_search(s, m, kCorrect)) return text::to_lower(m[1].str()) == "true";
  return std::nullopt;
}

ChatRequest AnswerJudge::request(std::string_view question, std::string_view gold, std::string_view predicted) const {
  ChatRequest req;
  req.system_prompt = prompts_.judge();
  req.user_message =
      fill_template(prompts_.judge_user(), {{"question", question}, {"gold", gold}, {"predicted", predicted}});
  req.max_new_tokens = 32;
  req.temperature = 0.0;
  return req;
}

JudgeVerdict AnswerJudge::judge(std::string_view question, std::string_view gold, std::string_view predicted) const {
  JudgeVerdict v;
  if (gateway_) {
    try {
      auto resp = gateway_->complete(request(question, gold, predicted));
      v.raw = resp.text;
      if (auto c = parse_correct_json(resp.text)) {
        v.correct = *c;
        return v;
      }
    } catch (const std::exception&) {
    }
  }
  v.gpt4o_fallback = true;
  v.correct = overlap_correct(gold, predicted);
  return v;
}

json to_json(const EvalRecord& r) {
  return {{"question_id", r.question_id},
          {"question_type", r.question_type},
          {"question", r.question},
          {"gold", r.gold},
          {"predicted", r.predicted},
          {"action_tag", r.action_tag},
          {"decided_by", r.decided_by},
          {"is_escalated", r.is_escalated},
          {"escalation_triggered", r.escalation_triggered},
          {"short_circuited", r.short_circuited},
          {"packed_tokens", r.packed_tokens},
          {"total_tokens", r.total_tokens},
          {"fixed_wrapper_tokens", r.fixed_wrapper_tokens},
          {"slm_call_count", r.slm_call_count},
          {"stage_tokens", r.stage_tokens},
          {"stage_invoked", r.stage_invoked},
          {"judge_verdict", r.judge_verdict ? json(*r.judge_verdict) : json(nullptr)},
          {"gpt4o_fallback", r.gpt4o_fallback},
          {"error", r.error ? json(*r.error) : json(nullptr)}};
}

EvalRecord eval_record_from_json(const json& j) {
  EvalRecord r;
  try {
    r.question_id = j.at("question_id").get<std::string>();
    r.question_type = j.at("question_type").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.gold = j.at("gold").get<std::string>();
    r.predicted = j.at("predicted").get<std::string>();
    r.action_tag = j.at("action_tag").get<std::string>();
    r.decided_by = j.at("decided_by").get<std::string>();
    r.is_escalated = j.at("is_escalated").get<bool>();
    r.escalation_triggered = j.at("escalation_triggered").get<bool>();
    r.short_circuited = j.at("short_circuited").get<bool>();
    r.packed_tokens = j.at("packed_tokens").get<std::size_t>();
    r.total_tokens = j.at("total_tokens").get<std::size_t>();
    r.fixed_wrapper_tokens = j.at("fixed_wrapper_tokens").get<std::size_t>();
    r.slm_call_count = j.at("slm_call_count").get<std::size_t>();
    r.stage_tokens = j.at("stage_tokens").get<std::map<std::string, std::size_t>>();
    r.stage_invoked = j.at("stage_invoked").get<std::map<std::string, bool>>();
    if (!j.at("judge_verdict").is_null()) r.judge_verdict = j.at("judge_verdict").get<bool>();
    r.gpt4o_fallback = j.at("gpt4o_fallback").get<bool>();
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("eval record: ") + e.what());
  }
  return r;
}

namespace {

EvalRecord record_for(const BenchItem& item, const PipelineResult& r) {
  EvalRecord rec;
  rec.question_id = item.question_id;
  rec.question_type = item.question_type;
  rec.question = item.question;
  rec.gold = item.gold_answer;
  rec.predicted = r.answer;
  rec.action_tag = std::string(to_string(r.action_tag));
  rec.decided_by = r.short_circuited ? "short-circuit" : std::string(to_string(r.decided_by));
  rec.is_escalated = r.is_escalated;
  rec.escalation_triggered = r.escalation_triggered;
  rec.short_circuited = r.short_circuited;
  rec.packed_tokens = r.packed_tokens;
  rec.total_tokens = r.total_tokens;
  rec.fixed_wrapper_tokens = r.fixed_wrapper_tokens;
  rec.slm_call_count = r.slm_call_count;
  for (const auto& s : r.stage_traces) {
    rec.stage_tokens[s.stage] = s.tokens();
    rec.stage_invoked[s.stage] = s.invoked;
  }
  return rec;
}

double ratio(std::size_t num, std::size_t den) { return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0; }

}  // namespace

BenchReport run_bench(const Benchmark& bench, const Pipeline& pipeline, const LlmGateway& gateway,
                      const AnswerJudge* judge, const BenchOptions& options) {
  std::vector<MemoryStore> stores;
  std::vector<HybridIndex> indexes;
  for (const auto& h : bench.histories) {
    stores.push_back(MemoryStore::from_history(h));
    indexes.push_back(HybridIndex::build(chunk_history(h, options.turns_per_chunk), pipeline.embedder()));
  }

  // Items run in question_id order so single-worker runs are reproducible.
  std::vector<std::size_t> order(bench.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return bench.items[a].question_id < bench.items[b].question_id; });

  std::vector<EvalRecord> records(order.size());
  std::vector<std::optional<PipelineResult>> results(order.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < order.size(); k = next++) {
      const auto& item = bench.items[order[k]];
      try {
        auto r = pipeline.answer_query(item.question, &stores.at(item.history), &indexes.at(item.history), gateway);
        records[k] = record_for(item, r);
        results[k] = std::move(r);
      } catch (const std::exception& e) {
        EvalRecord rec;
        rec.question_id = item.question_id;
        rec.question_type = item.question_type;
        rec.question = item.question;
        rec.gold = item.gold_answer;
        rec.error = e.what();
        records[k] = std::move(rec);
      }
      if (judge) {
        auto v = judge->judge(item.question, item.gold_answer, records[k].predicted);
        records[k].judge_verdict = v.correct;
        records[k].gpt4o_fallback = v.gpt4o_fallback;
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, order.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  BenchReport report;
  report.records = std::move(records);
  for (auto& r : results) {
    if (r) report.results.push_back(std::move(*r));
  }

  auto summary = to_json(trace_summary(report.results));
  std::size_t errors = 0, judged = 0, correct = 0;
  struct TypeStats {
    std::size_t n = 0, judged = 0, correct = 0, packed = 0;
  };
  std::map<std::string, TypeStats> per_type;
  for (const auto& rec : report.records) {
    auto& t = per_type[rec.question_type];
    ++t.n;
    t.packed += rec.packed_tokens;
    if (rec.error) ++errors;
    if (rec.judge_verdict) {
      ++judged;
      ++t.judged;
      if (*rec.judge_verdict) {
        ++correct;
        ++t.correct;
      }
    }
  }
  summary["items"] = report.records.size();
  summary["errors"] = errors;
  summary["ablations"] = pipeline.config().ablations.names();
  summary["accuracy"] = judge ? json(ratio(correct, judged)) : json(nullptr);
  json types = json::object();
  for (const auto& [name, t] : per_type) {
    types[name] = {{"count", t.n},
                   {"accuracy", judge ? json(ratio(t.correct, t.judged)) : json(nullptr)},
                   {"mean_packed_tokens", ratio(t.packed, t.n)}};
  }
  summary["per_type"] = types;
  report.summary = std::move(summary);
  return report;
}

void write_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<EvalRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::SchemaError, path.string() + ": invalid JSON line");
    out.push_back(eval_record_from_json(j));
  }
  return out;
}

}  // namespace memflow
