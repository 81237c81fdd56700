#include "memflow/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <regex>
#include <set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "memflow/error.hpp"
#include "memflow/llm_gateway.hpp"
#include "memflow/text.hpp"

namespace memflow {

using nlohmann::json;

std::vector<std::vector<float>> Embedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

std::vector<float> HashingEmbedder::embed(std::string_view s) const {
  std::vector<float> v(dim_, 0.0f);
  for (const auto& tok : text::tokenize(s)) {
    if (text::is_stopword(tok)) continue;
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : tok) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    v[h % dim_] += 1.0f;
  }
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  if (norm > 0.0) {
    auto inv = static_cast<float>(1.0 / std::sqrt(norm));
    for (auto& x : v) x *= inv;
  }
  return v;
}

HttpEmbedder::HttpEmbedder(std::string endpoint, std::string model, std::size_t dim)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), dim_(dim) {}

std::vector<float> HttpEmbedder::embed(std::string_view s) const {
  std::string one(s);
  return embed_batch(std::span<const std::string>(&one, 1)).front();
}

std::vector<std::vector<float>> HttpEmbedder::embed_batch(std::span<const std::string> texts) const {
  auto url = parse_url(endpoint_);
  if (url.path == "/") url.path = "/v1/embeddings";
  httplib::Client cli(url.origin);
  cli.set_read_timeout(120, 0);
  json body = {{"input", std::vector<std::string>(texts.begin(), texts.end())}};
  if (!model_.empty()) body["model"] = model_;
  auto res = cli.Post(url.path, body.dump(), "application/json");
  if (!res) throw Error(Errc::EmbedderError, endpoint_ + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(Errc::EmbedderError, "HTTP " + std::to_string(res->status));
  try {
    auto j = json::parse(res->body);
    std::vector<std::vector<float>> out;
    for (const auto& item : j.at("data")) out.push_back(item.at("embedding").get<std::vector<float>>());
    if (out.size() != texts.size()) throw Error(Errc::EmbedderError, "embedding count mismatch");
    for (const auto& v : out) {
      if (v.size() != dim_) throw Error(Errc::EmbedderError, "embedding dimension mismatch");
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(Errc::EmbedderError, std::string("bad embedding response: ") + e.what());
  }
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void sort_ranking(std::vector<ScoredChunk>& ranking) {
  std::sort(ranking.begin(), ranking.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk_id < b.chunk_id;
  });
}

// ---------------------------------------------------------------------------
// Vector cache

std::filesystem::path vector_cache_ids_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".ids";
  return p;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(Errc::CorruptStore, "vector cache truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_vector_cache(const VectorCache& cache, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  put_u32(out, static_cast<std::uint32_t>(cache.vectors.size()));
  put_u32(out, static_cast<std::uint32_t>(cache.dim));
  for (const auto& v : cache.vectors) {
    for (float f : v) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  std::ofstream ids(vector_cache_ids_path(path), std::ios::trunc);
  if (!ids) throw Error(Errc::IoError, "cannot write " + vector_cache_ids_path(path).string());
  for (const auto& id : cache.chunk_ids) ids << id << '\n';
}

VectorCache load_vector_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  VectorCache cache;
  auto count = get_u32(in);
  cache.dim = get_u32(in);
  cache.vectors.assign(count, std::vector<float>(cache.dim));
  for (auto& v : cache.vectors) {
    for (auto& f : v) f = std::bit_cast<float>(get_u32(in));
  }
  std::ifstream ids(vector_cache_ids_path(path));
  if (!ids) throw Error(Errc::IoError, "cannot open " + vector_cache_ids_path(path).string());
  std::string line;
  while (std::getline(ids, line)) {
    if (!line.empty()) cache.chunk_ids.push_back(line);
  }
  if (cache.chunk_ids.size() != cache.vectors.size())
    throw Error(Errc::CorruptStore, "vector cache id count does not match vector count");
  return cache;
}

// ---------------------------------------------------------------------------
// Index

HybridIndex HybridIndex::build(std::vector<Chunk> chunks, const Embedder& embedder, const VectorCache* cache) {
  HybridIndex idx;
  idx.dim_ = embedder.dimension();
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (!idx.by_id_.emplace(chunks[i].chunk_id, i).second)
      throw Error(Errc::IndexBuildError, "duplicate chunk_id '" + chunks[i].chunk_id + "'");
  }
  std::size_t total = 0;
  for (std::size_t d = 0; d < chunks.size(); ++d) {
    std::map<std::string, std::size_t> tf;
    auto toks = text::tokenize(chunks[d].text);
    for (auto& t : toks) ++tf[std::move(t)];
    for (auto& [term, n] : tf) idx.inverted_[term].push_back({d, n});
    idx.doc_len_.push_back(toks.size());
    total += toks.size();
  }
  idx.avgdl_ = chunks.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(chunks.size());

  std::map<std::string_view, std::size_t> cached;
  if (cache && cache->dim == idx.dim_) {
    for (std::size_t i = 0; i < cache->chunk_ids.size(); ++i) cached.emplace(cache->chunk_ids[i], i);
  }
  std::vector<std::string> pending_texts;
  std::vector<std::size_t> pending_docs;
  idx.vectors_.resize(chunks.size());
  for (std::size_t d = 0; d < chunks.size(); ++d) {
    if (auto it = cached.find(chunks[d].chunk_id); it != cached.end()) {
      idx.vectors_[d] = cache->vectors[it->second];
    } else {
      pending_texts.push_back(chunks[d].text);
      pending_docs.push_back(d);
    }
  }
  if (!pending_texts.empty()) {
    auto vecs = embedder.embed_batch(pending_texts);
    for (std::size_t i = 0; i < pending_docs.size(); ++i) idx.vectors_[pending_docs[i]] = std::move(vecs[i]);
  }
  for (const auto& v : idx.vectors_) {
    if (v.size() != idx.dim_) throw Error(Errc::IndexBuildError, "vector dimension mismatch");
    for (float f : v) {
      if (!std::isfinite(f)) throw Error(Errc::IndexBuildError, "non-finite vector component");
    }
  }
  idx.chunks_ = std::move(chunks);
  return idx;
}

std::size_t HybridIndex::document_frequency(std::string_view term) const {
  auto* p = postings(term);
  return p ? p->size() : 0;
}

const std::vector<HybridIndex::Posting>* HybridIndex::postings(std::string_view term) const {
  auto it = inverted_.find(std::string(term));
  return it == inverted_.end() ? nullptr : &it->second;
}

const Chunk* HybridIndex::find(std::string_view chunk_id) const {
  auto it = by_id_.find(chunk_id);
  return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

const Chunk& HybridIndex::chunk(std::string_view chunk_id) const {
  if (auto* c = find(chunk_id)) return *c;
  throw std::out_of_range("unknown chunk_id " + std::string(chunk_id));
}

VectorCache HybridIndex::export_vectors() const {
  VectorCache cache;
  cache.dim = dim_;
  cache.vectors = vectors_;
  for (const auto& c : chunks_) cache.chunk_ids.push_back(c.chunk_id);
  return cache;
}

// ---------------------------------------------------------------------------
// Ranking

std::vector<ScoredChunk> bm25_rank(const HybridIndex& index, std::string_view query, const RetrievalParams& p) {
  if (index.empty()) return {};
  auto toks = text::tokenize(query);
  std::set<std::string> terms(toks.begin(), toks.end());
  const double n = static_cast<double>(index.size());
  std::vector<double> scores(index.size(), 0.0);
  for (const auto& t : terms) {
    const auto* plist = index.postings(t);
    if (!plist) continue;
    const double df = static_cast<double>(plist->size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const auto& post : *plist) {
      const double tf = static_cast<double>(post.tf);
      const double len_norm = 1.0 - p.b + p.b * static_cast<double>(index.doc_length(post.doc)) / index.avgdl();
      scores[post.doc] += idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * len_norm);
    }
  }
  std::vector<ScoredChunk> out;
  for (std::size_t d = 0; d < scores.size(); ++d) {
    if (scores[d] > 0.0) out.push_back({index.chunks()[d].chunk_id, scores[d], {"bm25"}});
  }
  sort_ranking(out);
  return out;
}

std::vector<ScoredChunk> dense_rank(const HybridIndex& index, std::string_view query, const Embedder& embedder) {
  if (index.empty()) return {};
  if (embedder.dimension() != index.dimension())
    throw Error(Errc::EmbedderError, "embedder dimension " + std::to_string(embedder.dimension()) +
                                         " does not match index dimension " + std::to_string(index.dimension()));
  auto q = embedder.embed(query);
  if (q.size() != index.dimension()) throw Error(Errc::EmbedderError, "query vector has the wrong dimension");
  std::vector<ScoredChunk> out;
  for (std::size_t d = 0; d < index.size(); ++d) {
    double sim = cosine(q, index.vectors()[d]);
    if (sim > 0.0) out.push_back({index.chunks()[d].chunk_id, sim, {"dense"}});
  }
  sort_ranking(out);
  return out;
}

std::vector<ScoredChunk> rrf_fuse(std::span<const std::vector<std::string>> rankings, double rrf_k) {
  std::map<std::string, std::vector<std::size_t>> ranks;
  for (const auto& ranking : rankings) {
    std::set<std::string_view> seen;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      if (seen.insert(ranking[i]).second) ranks[ranking[i]].push_back(i + 1);
    }
  }
  std::vector<ScoredChunk> out;
  for (auto& [id, list] : ranks) {
    // Summing in rank order keeps the result independent of input order.
    std::sort(list.begin(), list.end());
    double score = 0.0;
    for (auto r : list) score += 1.0 / (rrf_k + static_cast<double>(r));
    out.push_back({id, score, {}});
  }
  sort_ranking(out);
  return out;
}

std::vector<ScoredChunk> hybrid_rank(const HybridIndex& index, std::string_view query, std::size_t top_k,
                                     const Embedder& embedder, const RetrievalParams& params,
                                     const std::string& source) {
  auto ids = [](const std::vector<ScoredChunk>& r) {
    std::vector<std::string> out;
    out.reserve(r.size());
    for (const auto& c : r) out.push_back(c.chunk_id);
    return out;
  };
  std::vector<std::vector<std::string>> lists = {ids(bm25_rank(index, query, params)),
                                                 ids(dense_rank(index, query, embedder))};
  auto fused = rrf_fuse(lists, params.rrf_k);
  if (fused.size() > top_k) fused.resize(top_k);
  for (auto& c : fused) c.rank_sources = {source};
  return fused;
}

// ---------------------------------------------------------------------------
// Anchors

std::string_view to_string(AnchorKind kind) {
  switch (kind) {
    case AnchorKind::Name: return "name";
    case AnchorKind::Quoted: return "quoted";
    case AnchorKind::NumericDate: return "numeric-date";
    case AnchorKind::NounPhrase: return "noun-phrase";
    case AnchorKind::Event: return "event";
  }
  return "name";
}

namespace {

struct Claims {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;

  bool overlaps(std::size_t b, std::size_t e) const {
    return std::any_of(ranges.begin(), ranges.end(), [&](const auto& r) { return b < r.second && r.first < e; });
  }
  void add(std::size_t b, std::size_t e) { ranges.emplace_back(b, e); }
};

bool all_stopwords(std::string_view s) {
  auto toks = text::tokenize(s);
  return std::all_of(toks.begin(), toks.end(), [](const std::string& t) { return text::is_stopword(t); });
}

const std::string kMonthNames =
    "January|February|March|April|May|June|July|August|September|October|November|December|"
    "Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec";

bool sentence_initial(std::string_view s, std::size_t pos) {
  std::size_t i = pos;
  while (i > 0) {
    char c = s[i - 1];
    if (c == ' ' || c == '\t' || c == '\n' || c == '"' || c == '\'' || c == '(') {
      --i;
      continue;
    }
    return c == '.' || c == '!' || c == '?';
  }
  return true;
}

// Words made of letters, digits, apostrophes and hyphens.
struct Word {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string_view text;
};

std::vector<Word> scan_words(std::string_view s) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    if (std::isalnum(c) || c >= 0x80) {
      std::size_t b = i;
      while (i < s.size()) {
        auto d = static_cast<unsigned char>(s[i]);
        if (std::isalnum(d) || d >= 0x80 || ((d == '\'' || d == '-') && i + 1 < s.size() &&
                                             std::isalnum(static_cast<unsigned char>(s[i + 1]))))
          ++i;
        else
          break;
      }
      out.push_back({b, i, s.substr(b, i - b)});
    } else {
      ++i;
    }
  }
  return out;
}

bool only_space_between(std::string_view s, std::size_t a, std::size_t b) {
  for (std::size_t i = a; i < b; ++i) {
    if (s[i] != ' ' && s[i] != '\t') return false;
  }
  return true;
}

std::string strip_possessive(std::string_view w) {
  std::string out(w);
  if (out.size() > 2 && (out.ends_with("'s") || out.ends_with("'S"))) out.resize(out.size() - 2);
  return out;
}

}  // namespace

std::vector<Anchor> extract_anchors(std::string_view query) {
  const std::string s(query);
  std::vector<Anchor> found;
  Claims claims;
  auto add = [&](std::string text_value, AnchorKind kind, std::size_t b, std::size_t e) {
    claims.add(b, e);
    auto trimmed = std::string(text::trim(text_value));
    if (trimmed.empty() || all_stopwords(trimmed)) return;
    found.push_back({std::move(trimmed), kind, b});
  };

  // Quoted strings.
  static const std::regex dq(R"re("([^"]+)")re");
  static const std::regex curly("\xE2\x80\x9C([^\xE2]+)\xE2\x80\x9D");
  static const std::regex sq(R"re((^|[\s(\[])'([^']+)'(?=[\s.,;:!?)\]]|$))re");
  for (const auto* re : {&dq, &curly}) {
    for (auto it = std::sregex_iterator(s.begin(), s.end(), *re); it != std::sregex_iterator(); ++it) {
      auto b = static_cast<std::size_t>(it->position(0));
      add((*it)[1].str(), AnchorKind::Quoted, b, b + static_cast<std::size_t>(it->length(0)));
    }
  }
  for (auto it = std::sregex_iterator(s.begin(), s.end(), sq); it != std::sregex_iterator(); ++it) {
    auto b = static_cast<std::size_t>(it->position(2)) - 1;
    auto e = static_cast<std::size_t>(it->position(2) + it->length(2)) + 1;
    if (claims.overlaps(b, e)) continue;
    add((*it)[2].str(), AnchorKind::Quoted, b, e);
  }

  // Dates and numbers, longest forms first.
  static const std::vector<std::regex> dates = {
      std::regex(R"(\b\d{4}-\d{2}-\d{2}\b)"),
      std::regex(R"(\b\d{1,2}/\d{1,2}/\d{2,4}\b)"),
      std::regex("\\b(" + kMonthNames + ")\\.?\\s+\\d{1,2}(st|nd|rd|th)?(,?\\s+\\d{4})?\\b"),
      std::regex("\\b\\d{1,2}(st|nd|rd|th)?\\s+(" + kMonthNames + ")(,?\\s+\\d{4})?\\b"),
      std::regex("\\b(" + kMonthNames + ")\\.?,?\\s+\\d{4}\\b"),
      std::regex(R"(\b(19|20)\d{2}\b)"),
      std::regex(R"(\$?\b\d{2,}(\.\d+)?\b%?)"),
  };
  for (const auto& re : dates) {
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
      auto b = static_cast<std::size_t>(it->position(0));
      auto e = b + static_cast<std::size_t>(it->length(0));
      if (claims.overlaps(b, e)) continue;
      add(it->str(), AnchorKind::NumericDate, b, e);
    }
  }

  // Noun phrases after possessive or relational markers.
  auto words = scan_words(s);
  auto np_tail = [&](std::size_t start_word, std::size_t& end_byte) {
    std::string phrase;
    std::size_t taken = 0;
    for (std::size_t j = start_word; j < words.size() && taken < 3; ++j) {
      if (j > start_word && !only_space_between(s, words[j - 1].end, words[j].begin)) break;
      if (j == start_word && j > 0 && !only_space_between(s, words[j - 1].end, words[j].begin)) break;
      if (claims.overlaps(words[j].begin, words[j].end)) break;
      auto lw = text::to_lower(words[j].text);
      if (text::is_stopword(lw)) break;
      if (!phrase.empty()) phrase += ' ';
      phrase += words[j].text;
      end_byte = words[j].end;
      ++taken;
    }
    return phrase;
  };
  static const std::set<std::string, std::less<>> kMarkers = {"my", "your", "his", "her", "our", "their"};
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto lw = text::to_lower(words[i].text);
    bool possessive = lw.size() > 2 && lw.ends_with("'s") && !claims.overlaps(words[i].begin, words[i].end);
    if (!kMarkers.contains(lw) && !possessive) continue;
    if (i + 1 >= words.size()) continue;
    std::size_t end = 0;
    auto tail = np_tail(i + 1, end);
    if (tail.empty()) continue;
    if (possessive) {
      add(std::string(words[i].text) + " " + tail, AnchorKind::NounPhrase, words[i].begin, end);
    } else {
      add(tail, AnchorKind::NounPhrase, words[i + 1].begin, end);
    }
  }

  // Capitalized name spans.
  std::size_t i = 0;
  while (i < words.size()) {
    auto is_cap = [&](std::size_t k) {
      return std::isupper(static_cast<unsigned char>(words[k].text.front())) &&
             !claims.overlaps(words[k].begin, words[k].end);
    };
    if (!is_cap(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < words.size() && is_cap(j + 1) && only_space_between(s, words[j].end, words[j + 1].begin)) ++j;
    // Trim stopwords ("I", "The", "Did") from both ends.
    std::size_t b = i, e = j;
    while (b <= e && text::is_stopword(text::to_lower(strip_possessive(words[b].text)))) ++b;
    while (e >= b && e > 0 && text::is_stopword(text::to_lower(strip_possessive(words[e].text)))) --e;
    if (b <= e && e < words.size()) {
      bool lone_initial = b == e && sentence_initial(s, words[b].begin);
      if (!lone_initial) {
        std::string name;
        for (std::size_t k = b; k <= e; ++k) {
          if (k > b) name += ' ';
          name += k == e ? strip_possessive(words[k].text) : std::string(words[k].text);
        }
        add(name, AnchorKind::Name, words[b].begin, words[e].end);
      }
    }
    i = j + 1;
  }

  std::stable_sort(found.begin(), found.end(), [](const Anchor& a, const Anchor& b) { return a.position < b.position; });
  std::vector<Anchor> out;
  std::set<std::string> seen;
  for (auto& a : found) {
    if (seen.insert(text::to_lower(a.text)).second) out.push_back(std::move(a));
  }
  return out;
}

std::vector<Anchor> event_anchors(std::string_view query) {
  static const std::set<std::string, std::less<>> kSeparators = {
      "and", "or", "between", "before", "after", "since", "until", "when", "while", "then", "than", "vs", "versus"};
  static const std::set<std::string, std::less<>> kScaffold = {
      "many", "much", "long", "days", "day", "weeks", "week", "months", "month", "years", "year", "time",
      "passed", "elapsed", "ago", "first", "later", "earlier", "happened", "take", "took", "last"};
  const std::string s(query);
  auto date_hits = extract_anchors(query);

  struct Span {
    std::size_t begin;
    std::size_t end;
    int score;
  };
  std::vector<Span> spans;
  auto words = scan_words(s);
  std::size_t seg_begin = std::string::npos;
  std::size_t seg_end = 0;
  auto close = [&]() {
    if (seg_begin == std::string::npos) return;
    auto seg = std::string_view(s).substr(seg_begin, seg_end - seg_begin);
    int score = 0;
    for (const auto& t : text::tokenize(seg)) {
      if (!text::is_stopword(t) && !kScaffold.contains(t)) ++score;
    }
    for (const auto& a : date_hits) {
      if (a.kind == AnchorKind::NumericDate && a.position >= seg_begin && a.position < seg_end) ++score;
    }
    if (score > 0) spans.push_back({seg_begin, seg_end, score});
    seg_begin = std::string::npos;
  };
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (k > 0) {
      auto between = std::string_view(s).substr(words[k - 1].end, words[k].begin - words[k - 1].end);
      if (between.find_first_of(",;:?!.") != std::string_view::npos) close();
    }
    auto lw = text::to_lower(words[k].text);
    if (kSeparators.contains(lw)) {
      close();
      continue;
    }
    if (seg_begin == std::string::npos) seg_begin = words[k].begin;
    seg_end = words[k].end;
  }
  close();

  std::vector<std::size_t> order(spans.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (spans[a].score != spans[b].score) return spans[a].score > spans[b].score;
    return spans[a].begin < spans[b].begin;
  });
  if (order.size() > 2) order.resize(2);
  std::sort(order.begin(), order.end());
  std::vector<Anchor> out;
  for (auto k : order) {
    out.push_back({s.substr(spans[k].begin, spans[k].end - spans[k].begin), AnchorKind::Event, spans[k].begin});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-pass retrieval

std::vector<ScoredChunk> merge_max(std::vector<std::vector<ScoredChunk>> passes) {
  std::map<std::string, ScoredChunk> merged;
  for (auto& pass : passes) {
    for (auto& c : pass) {
      auto [it, inserted] = merged.try_emplace(c.chunk_id, c);
      if (inserted) continue;
      auto& m = it->second;
      m.score = std::max(m.score, c.score);
      for (auto& src : c.rank_sources) {
        if (std::find(m.rank_sources.begin(), m.rank_sources.end(), src) == m.rank_sources.end())
          m.rank_sources.push_back(src);
      }
    }
  }
  std::vector<ScoredChunk> out;
  out.reserve(merged.size());
  for (auto& [id, c] : merged) out.push_back(std::move(c));
  sort_ranking(out);
  return out;
}

std::vector<ScoredChunk> multipass_retrieve(const HybridIndex& index, std::string_view query, std::size_t top_k,
                                            const Embedder& embedder, const RetrievalParams& params) {
  std::vector<std::vector<ScoredChunk>> passes;
  passes.push_back(hybrid_rank(index, query, top_k, embedder, params, "primary"));
  for (const auto& a : extract_anchors(query))
    passes.push_back(hybrid_rank(index, a.text, params.base_top_k, embedder, params, "anchor:" + a.text));
  return merge_max(std::move(passes));
}

std::vector<ScoredChunk> dual_anchor_retrieve(const HybridIndex& index, std::string_view query,
                                              const Embedder& embedder, const RetrievalParams& params) {
  auto anchors = event_anchors(query);
  if (anchors.empty()) return hybrid_rank(index, query, params.tier3_top_k, embedder, params, "primary");
  std::vector<std::vector<ScoredChunk>> passes;
  for (const auto& a : anchors)
    passes.push_back(hybrid_rank(index, a.text, params.tier3_top_k, embedder, params, "event:" + a.text));
  return merge_max(std::move(passes));
}

}  // namespace memflow
