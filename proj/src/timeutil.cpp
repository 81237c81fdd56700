#include "memflow/timeutil.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <regex>

#include "memflow/text.hpp"

namespace memflow {

namespace {

using namespace std::chrono;

constexpr std::array<std::string_view, 12> kMonths = {
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december"};

std::optional<sys_days> make_date(int y, unsigned m, unsigned d) {
  year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

std::optional<Timestamp> make_ts(int y, unsigned mo, unsigned d, int h, int mi, int s) {
  auto date = make_date(y, mo, d);
  if (!date || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) return std::nullopt;
  return Timestamp{*date} + hours{h} + minutes{mi} + seconds{s};
}

int to_int(const std::ssub_match& m) { return m.matched ? std::stoi(m.str()) : 0; }

const std::string kMonthAlt =
    "(jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|"
    "sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)";

}  // namespace

std::optional<unsigned> month_from_name(std::string_view name) {
  auto lower = text::to_lower(name);
  if (lower.size() < 3) return std::nullopt;
  for (unsigned i = 0; i < kMonths.size(); ++i) {
    auto full = kMonths[i];
    if (lower == full) return i + 1;
    if (lower.size() <= full.size() && full.substr(0, lower.size()) == lower &&
        (lower.size() == 3 || (i == 8 && lower == "sept")))
      return i + 1;
  }
  return std::nullopt;
}

std::optional<Timestamp> parse_timestamp(std::string_view raw) {
  const std::string s(text::trim(raw));
  if (s.empty()) return std::nullopt;
  std::smatch m;

  static const std::regex iso(
      R"(^(\d{4})-(\d{2})-(\d{2})(?:[T ](\d{2}):(\d{2})(?::(\d{2})(?:\.\d+)?)?)?\s*(Z|[+-]\d{2}:?\d{2})?$)",
      std::regex::icase);
  if (std::regex_match(s, m, iso)) {
    auto ts = make_ts(to_int(m[1]), static_cast<unsigned>(to_int(m[2])),
                      static_cast<unsigned>(to_int(m[3])), to_int(m[4]), to_int(m[5]), to_int(m[6]));
    if (!ts) return std::nullopt;
    if (m[7].matched && m[7].str() != "Z" && m[7].str() != "z") {
      auto off = m[7].str();
      int sign = off[0] == '-' ? -1 : 1;
      off.erase(0, 1);
      off.erase(std::remove(off.begin(), off.end(), ':'), off.end());
      int oh = std::stoi(off.substr(0, 2));
      int om = std::stoi(off.substr(2, 2));
      *ts -= sign * (hours{oh} + minutes{om});
    }
    return ts;
  }

  // LongMemEval style: 2023/05/20 (Sat) 02:21
  static const std::regex slashed(
      R"(^(\d{4})/(\d{1,2})/(\d{1,2})(?:\s*\(\w+\))?(?:\s+(\d{1,2}):(\d{2})(?::(\d{2}))?)?$)");
  if (std::regex_match(s, m, slashed)) {
    return make_ts(to_int(m[1]), static_cast<unsigned>(to_int(m[2])),
                   static_cast<unsigned>(to_int(m[3])), to_int(m[4]), to_int(m[5]), to_int(m[6]));
  }

  // LoCoMo style: 1:56 pm on 8 May, 2023
  static const std::regex clock_on(
      R"(^(\d{1,2}):(\d{2})\s*(am|pm)\s+on\s+(\d{1,2})\s+([A-Za-z]+),?\s+(\d{4})$)", std::regex::icase);
  if (std::regex_match(s, m, clock_on)) {
    auto mon = month_from_name(m[5].str());
    if (!mon) return std::nullopt;
    int h = to_int(m[1]);
    if (h < 1 || h > 12) return std::nullopt;
    bool pm = text::to_lower(m[3].str()) == "pm";
    h = (h % 12) + (pm ? 12 : 0);
    return make_ts(to_int(m[6]), *mon, static_cast<unsigned>(to_int(m[4])), h, to_int(m[2]), 0);
  }

  static const std::regex month_first(R"(^([A-Za-z]+)\.?\s+(\d{1,2})(?:st|nd|rd|th)?,?\s+(\d{4})$)");
  if (std::regex_match(s, m, month_first)) {
    auto mon = month_from_name(m[1].str());
    if (!mon) return std::nullopt;
    return make_ts(to_int(m[3]), *mon, static_cast<unsigned>(to_int(m[2])), 0, 0, 0);
  }

  static const std::regex day_first(R"(^(\d{1,2})(?:st|nd|rd|th)?\s+([A-Za-z]+)\.?,?\s+(\d{4})$)");
  if (std::regex_match(s, m, day_first)) {
    auto mon = month_from_name(m[2].str());
    if (!mon) return std::nullopt;
    return make_ts(to_int(m[3]), *mon, static_cast<unsigned>(to_int(m[1])), 0, 0, 0);
  }
  return std::nullopt;
}

std::string format_iso(Timestamp ts) {
  auto day_point = floor<days>(ts);
  year_month_day ymd{day_point};
  hh_mm_ss tod{ts - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

std::string format_date(sys_days d) {
  year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_date(Timestamp ts) { return format_date(floor<days>(ts)); }

std::optional<sys_days> parse_iso_date(std::string_view raw) {
  auto s = text::trim(raw);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
  }
  int y = std::stoi(std::string(s.substr(0, 4)));
  unsigned mo = static_cast<unsigned>(std::stoi(std::string(s.substr(5, 2))));
  unsigned d = static_cast<unsigned>(std::stoi(std::string(s.substr(8, 2))));
  return make_date(y, mo, d);
}

std::vector<std::string> extract_date_labels(std::string_view text_in) {
  const std::string s(text_in);
  struct Hit {
    std::size_t pos;
    std::string label;
  };
  std::vector<Hit> hits;

  static const std::regex iso(R"(\b(\d{4})-(\d{2})-(\d{2})\b)");
  for (auto it = std::sregex_iterator(s.begin(), s.end(), iso); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (auto d = make_date(to_int(m[1]), static_cast<unsigned>(to_int(m[2])), static_cast<unsigned>(to_int(m[3]))))
      hits.push_back({static_cast<std::size_t>(m.position(0)), format_date(*d)});
  }
  static const std::regex named("\\b" + kMonthAlt + "\\.?\\s+(\\d{1,2})(?:st|nd|rd|th)?,\\s*(\\d{4})\\b",
                                std::regex::icase);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), named); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    auto mon = month_from_name(m[1].str());
    if (!mon) continue;
    if (auto d = make_date(to_int(m[3]), *mon, static_cast<unsigned>(to_int(m[2]))))
      hits.push_back({static_cast<std::size_t>(m.position(0)), format_date(*d)});
  }
  static const std::regex us(R"(\b(\d{1,2})/(\d{1,2})/(\d{4})\b)");
  for (auto it = std::sregex_iterator(s.begin(), s.end(), us); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (auto d = make_date(to_int(m[3]), static_cast<unsigned>(to_int(m[1])), static_cast<unsigned>(to_int(m[2]))))
      hits.push_back({static_cast<std::size_t>(m.position(0)), format_date(*d)});
  }

  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });
  std::vector<std::string> out;
  for (auto& h : hits) {
    if (std::find(out.begin(), out.end(), h.label) == out.end()) out.push_back(std::move(h.label));
  }
  return out;
}

}  // namespace memflow
