#include "memflow/memory_store.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "memflow/error.hpp"
#include "memflow/text.hpp"

namespace memflow {

using nlohmann::json;

std::size_t ConversationHistory::turn_count() const {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.turns.size();
  return n;
}

const std::vector<ProfilePattern>& default_profile_patterns() {
  static const std::vector<ProfilePattern> kPatterns = {
      {"I prefer", "preference"},   {"my favorite", "preference"}, {"my favourite", "preference"},
      {"I am a", "identity"},       {"I'm a", "identity"},         {"I live in", "location"},
      {"I work", "occupation"},     {"I always", "habit"},         {"I never", "habit"},
      {"I like", "preference"},     {"I don't like", "dislike"},
  };
  return kPatterns;
}

namespace {

std::string record_where(std::size_t i) { return "record " + std::to_string(i); }

const json& require(const json& obj, const char* field, std::size_t i) {
  if (!obj.is_object() || !obj.contains(field))
    throw Error(Errc::MalformedRecord, record_where(i) + ": missing field '" + field + "'");
  return obj.at(field);
}

Session parse_session(const json& rec, std::size_t i) {
  if (!rec.is_object()) throw Error(Errc::MalformedRecord, record_where(i) + ": not an object");
  Session s;
  const auto& id = require(rec, "session_id", i);
  if (id.is_string()) {
    s.session_id = id.get<std::string>();
  } else if (id.is_number_integer()) {
    s.session_id = std::to_string(id.get<long long>());
  } else {
    throw Error(Errc::MalformedRecord, record_where(i) + ": session_id must be a string");
  }
  if (s.session_id.empty()) throw Error(Errc::MalformedRecord, record_where(i) + ": empty session_id");

  if (!rec.contains("timestamp") || !rec.at("timestamp").is_string())
    throw Error(Errc::BadTimestamp, record_where(i) + " (" + s.session_id + "): missing timestamp");
  auto raw_ts = rec.at("timestamp").get<std::string>();
  auto ts = parse_timestamp(raw_ts);
  if (!ts) throw Error(Errc::BadTimestamp, record_where(i) + " (" + s.session_id + "): '" + raw_ts + "'");
  s.timestamp = *ts;

  const auto& turns = require(rec, "turns", i);
  if (!turns.is_array()) throw Error(Errc::MalformedRecord, record_where(i) + ": turns must be an array");
  std::optional<std::size_t> prev_index;
  for (std::size_t t = 0; t < turns.size(); ++t) {
    const auto& tj = turns[t];
    auto where = record_where(i) + " turn " + std::to_string(t);
    if (!tj.is_object() || !tj.contains("role") || !tj.contains("text") || !tj.at("role").is_string() ||
        !tj.at("text").is_string())
      throw Error(Errc::MalformedRecord, where + ": turns need string 'role' and 'text'");
    Turn turn;
    turn.role = tj.at("role").get<std::string>();
    turn.text = tj.at("text").get<std::string>();
    if (text::trim(turn.text).empty()) throw Error(Errc::MalformedRecord, where + ": empty text");
    turn.turn_index = t;
    if (tj.contains("turn_index")) {
      if (!tj.at("turn_index").is_number_unsigned())
        throw Error(Errc::MalformedRecord, where + ": turn_index must be a non-negative integer");
      turn.turn_index = tj.at("turn_index").get<std::size_t>();
    }
    if (prev_index && turn.turn_index <= *prev_index)
      throw Error(Errc::MalformedRecord, where + ": turn_index not strictly increasing");
    prev_index = turn.turn_index;
    s.turns.push_back(std::move(turn));
  }
  return s;
}

std::string normalize_apostrophes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    // U+2019 RIGHT SINGLE QUOTATION MARK
    if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
        static_cast<unsigned char>(s[i + 1]) == 0x80 && static_cast<unsigned char>(s[i + 2]) == 0x99) {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

bool speaks_for_user(const std::string& role) {
  auto r = text::to_lower(role);
  return r != "assistant" && r != "system" && r != "document" && r != "tool";
}

}  // namespace

ConversationHistory ingest_history(const json& records, std::string source_label) {
  if (!records.is_array()) throw Error(Errc::MalformedRecord, "expected an array of session records");
  ConversationHistory h;
  h.source_label = std::move(source_label);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto s = parse_session(records[i], i);
    if (!seen.insert(s.session_id).second)
      throw Error(Errc::MalformedRecord, record_where(i) + ": duplicate session_id '" + s.session_id + "'");
    h.sessions.push_back(std::move(s));
  }
  std::stable_sort(h.sessions.begin(), h.sessions.end(), [](const Session& a, const Session& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.session_id < b.session_id;
  });
  return h;
}

std::vector<Chunk> chunk_history(const ConversationHistory& h, std::size_t turns_per_chunk) {
  if (turns_per_chunk == 0) turns_per_chunk = 1;
  std::vector<Chunk> out;
  for (std::size_t si = 0; si < h.sessions.size(); ++si) {
    const auto& s = h.sessions[si];
    std::size_t ordinal = 0;
    for (std::size_t start = 0; start < s.turns.size(); start += turns_per_chunk) {
      std::size_t end = std::min(start + turns_per_chunk, s.turns.size());
      Chunk c;
      c.chunk_id = s.session_id + "#" + std::to_string(ordinal++);
      c.session_id = s.session_id;
      if (s.timestamp != Timestamp{}) c.session_timestamp = s.timestamp;
      c.session_order = si;
      c.turn_span = {s.turns[start].turn_index, s.turns[end - 1].turn_index};
      for (std::size_t t = start; t < end; ++t) {
        if (t > start) c.text += '\n';
        c.text += s.turns[t].role + ": " + s.turns[t].text;
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

UserProfile compile_profile(const ConversationHistory& h, const std::vector<ProfilePattern>& patterns) {
  UserProfile profile;
  for (const auto& s : h.sessions) {
    for (const auto& turn : s.turns) {
      if (!speaks_for_user(turn.role)) continue;
      for (const auto& sentence : text::split_sentences(normalize_apostrophes(turn.text))) {
        for (const auto& p : patterns) {
          if (text::contains_bounded(sentence, p.phrase)) {
            profile.facts.push_back({p.key, sentence, s.session_id, s.timestamp});
            break;
          }
        }
      }
    }
  }
  std::stable_sort(profile.facts.begin(), profile.facts.end(),
                   [](const ProfileFact& a, const ProfileFact& b) { return a.timestamp < b.timestamp; });
  return profile;
}

std::string UserProfile::render() const {
  std::map<std::string, std::vector<const ProfileFact*>> by_key;
  for (const auto& f : facts) by_key[f.key].push_back(&f);
  std::string out;
  for (auto& [key, list] : by_key) {
    for (auto it = list.rbegin(); it != list.rend(); ++it) {
      const auto& f = **it;
      if (!out.empty()) out += '\n';
      out += "- [" + key + "] " + f.value + " (session " + f.session_id + ", " + format_date(f.timestamp) + ")";
    }
  }
  return out;
}

MemoryStore MemoryStore::from_history(ConversationHistory h) {
  MemoryStore store;
  store.profile = compile_profile(h);
  store.history = std::move(h);
  return store;
}

json session_to_json(const Session& s) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back({{"role", t.role}, {"text", t.text}, {"turn_index", t.turn_index}});
  return {{"session_id", s.session_id}, {"timestamp", format_iso(s.timestamp)}, {"turns", std::move(turns)}};
}

json fact_to_json(const ProfileFact& f) {
  return {{"key", f.key}, {"value", f.value}, {"session_id", f.session_id}, {"timestamp", format_iso(f.timestamp)}};
}

std::filesystem::path profile_sidecar_path(const std::filesystem::path& store_path) {
  auto p = store_path;
  p += ".profile.jsonl";
  return p;
}

void save_store(const MemoryStore& store, const std::filesystem::path& path) {
  auto write = [](const std::filesystem::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + p.string() + " for writing");
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw Error(Errc::IoError, "write failed for " + p.string());
  };
  std::vector<std::string> lines;
  lines.push_back(json{{"memflow_store_version", kStoreVersion}, {"source_label", store.history.source_label}}.dump());
  for (const auto& s : store.history.sessions) lines.push_back(session_to_json(s).dump());
  write(path, lines);

  std::vector<std::string> facts;
  facts.push_back(json{{"memflow_store_version", kStoreVersion}}.dump());
  for (const auto& f : store.profile.facts) facts.push_back(fact_to_json(f).dump());
  write(profile_sidecar_path(path), facts);
}

namespace {

std::vector<std::pair<std::size_t, json>> read_jsonl(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + p.string());
  std::vector<std::pair<std::size_t, json>> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (text::trim(line).empty()) continue;
    try {
      out.emplace_back(no, json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(Errc::CorruptStore, p.string() + " line " + std::to_string(no) + ": " + e.what());
    }
  }
  if (in.bad()) throw Error(Errc::IoError, "read failed for " + p.string());
  return out;
}

void check_header(const std::filesystem::path& p, const std::vector<std::pair<std::size_t, json>>& rows) {
  if (rows.empty() || !rows.front().second.is_object() ||
      rows.front().second.value("memflow_store_version", 0) != kStoreVersion)
    throw Error(Errc::CorruptStore, p.string() + " line 1: missing or unsupported memflow_store_version header");
}

}  // namespace

MemoryStore load_store(const std::filesystem::path& path) {
  auto rows = read_jsonl(path);
  check_header(path, rows);
  MemoryStore store;
  json records = json::array();
  for (std::size_t i = 1; i < rows.size(); ++i) records.push_back(rows[i].second);
  try {
    store.history = ingest_history(records, rows.front().second.value("source_label", std::string{}));
  } catch (const Error& e) {
    // ingest reports "record N"; translate back to the file line.
    auto msg = std::string(e.what());
    auto pos = msg.find("record ");
    std::size_t line = 0;
    if (pos != std::string::npos) {
      auto idx = static_cast<std::size_t>(std::stoul(msg.substr(pos + 7)));
      if (idx + 1 < rows.size()) line = rows[idx + 1].first;
    }
    throw Error(Errc::CorruptStore, path.string() + " line " + std::to_string(line) + ": " + msg);
  }

  auto side = profile_sidecar_path(path);
  auto fact_rows = read_jsonl(side);
  check_header(side, fact_rows);
  for (std::size_t i = 1; i < fact_rows.size(); ++i) {
    const auto& [no, j] = fact_rows[i];
    try {
      ProfileFact f;
      f.key = j.at("key").get<std::string>();
      f.value = j.at("value").get<std::string>();
      f.session_id = j.at("session_id").get<std::string>();
      auto ts = parse_timestamp(j.at("timestamp").get<std::string>());
      if (!ts || f.value.empty()) throw std::runtime_error("bad fact");
      f.timestamp = *ts;
      store.profile.facts.push_back(std::move(f));
    } catch (const std::exception& e) {
      throw Error(Errc::CorruptStore, side.string() + " line " + std::to_string(no) + ": " + e.what());
    }
  }
  return store;
}

}  // namespace memflow
