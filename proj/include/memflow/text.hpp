#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by retrieval, validation and the tools. All
// case folding is ASCII-only; bytes >= 0x80 are treated as word characters
// so UTF-8 words survive tokenization intact.
namespace memflow::text {

bool is_word_byte(unsigned char c);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

/// Lowercase, split on non-alphanumeric. Order and duplicates preserved.
std::vector<std::string> tokenize(std::string_view s);

/// Whitespace-delimited words, as used by the word caps and the counter.
std::vector<std::string_view> split_words(std::string_view s);
std::size_t count_words(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool is_stopword(std::string_view lowered_token);
const std::set<std::string, std::less<>>& stopwords();

/// Lowercased tokens with stopwords removed, as a set.
std::set<std::string> content_tokens(std::string_view s);

/// Case-insensitive occurrences of `needle` bounded by non-word bytes on both
/// sides. `needle` may span several words.
std::size_t count_bounded(std::string_view haystack, std::string_view needle);
bool contains_bounded(std::string_view haystack, std::string_view needle);

/// Splits on terminal punctuation (. ! ?) followed by whitespace, and on
/// newlines. Empty pieces are dropped; pieces are trimmed.
std::vector<std::string> split_sentences(std::string_view s);

/// |A ∩ B| / |A ∪ B| over lowercase token sets; two empty sets give 1.
double jaccard(std::string_view a, std::string_view b);

/// Truncates to at most `max_bytes` without splitting a UTF-8 sequence.
std::string_view utf8_prefix(std::string_view s, std::size_t max_bytes);

}  // namespace memflow::text
