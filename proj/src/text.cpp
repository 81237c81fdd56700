#include "memflow/text.hpp"

#include <algorithm>
#include <cctype>

#include "memflow/assets.hpp"
#include "memflow/error.hpp"

namespace memflow {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::BadTimestamp: return "BadTimestamp";
    case Errc::IoError: return "IoError";
    case Errc::CorruptStore: return "CorruptStore";
    case Errc::NetworkError: return "NetworkError";
    case Errc::TimeoutError: return "TimeoutError";
    case Errc::BackendRefused: return "BackendRefused";
    case Errc::ClassificationUnavailable: return "ClassificationUnavailable";
    case Errc::IndexBuildError: return "IndexBuildError";
    case Errc::EmbedderError: return "EmbedderError";
    case Errc::EmptyProfile: return "EmptyProfile";
    case Errc::PinnedOverflow: return "PinnedOverflow";
    case Errc::BadDate: return "BadDate";
    case Errc::StoreNotReady: return "StoreNotReady";
    case Errc::IndexNotReady: return "IndexNotReady";
    case Errc::UnknownFormat: return "UnknownFormat";
    case Errc::SchemaError: return "SchemaError";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace memflow

namespace memflow::text {

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::size_t count_words(std::string_view s) { return split_words(s).size(); }

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> kWords = [] {
    std::set<std::string, std::less<>> words;
    for (const auto& line : split(assets::get("stopwords.txt"), '\n')) {
      auto w = trim(line);
      if (w.empty() || w.front() == '#') continue;
      words.insert(to_lower(w));
    }
    return words;
  }();
  return kWords;
}

bool is_stopword(std::string_view lowered_token) { return stopwords().contains(lowered_token); }

std::set<std::string> content_tokens(std::string_view s) {
  std::set<std::string> out;
  for (auto& t : tokenize(s)) {
    if (!is_stopword(t)) out.insert(std::move(t));
  }
  return out;
}

std::size_t count_bounded(std::string_view haystack, std::string_view needle) {
  auto n = to_lower(trim(needle));
  if (n.empty()) return 0;
  auto h = to_lower(haystack);
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = h.find(n, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || !is_word_byte(static_cast<unsigned char>(h[pos - 1]));
    std::size_t end = pos + n.size();
    bool right_ok = end >= h.size() || !is_word_byte(static_cast<unsigned char>(h[end]));
    if (left_ok && right_ok) {
      ++count;
      pos = end;
    } else {
      ++pos;
    }
  }
  return count;
}

bool contains_bounded(std::string_view haystack, std::string_view needle) {
  return count_bounded(haystack, needle) > 0;
}

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  auto flush = [&](std::size_t from, std::size_t to) {
    auto piece = trim(s.substr(from, to - from));
    if (!piece.empty()) out.emplace_back(piece);
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\n') {
      flush(start, i);
      start = i + 1;
    } else if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i;
      while (j + 1 < s.size() && (s[j + 1] == '.' || s[j + 1] == '!' || s[j + 1] == '?')) ++j;
      if (j + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[j + 1]))) {
        flush(start, j + 1);
        start = j + 1;
      }
      i = j;
    }
  }
  if (start < s.size()) flush(start, s.size());
  return out;
}

double jaccard(std::string_view a, std::string_view b) {
  auto ta = tokenize(a);
  auto tb = tokenize(b);
  std::set<std::string> sa(ta.begin(), ta.end());
  std::set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string_view utf8_prefix(std::string_view s, std::size_t max_bytes) {
  if (s.size() <= max_bytes) return s;
  std::size_t cut = max_bytes;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return s.substr(0, cut);
}

}  // namespace memflow::text
