#include "memflow/tools.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>

#include "memflow/error.hpp"
#include "memflow/text.hpp"
#include "memflow/timeutil.hpp"

namespace memflow {

namespace {

struct LineRef {
  std::size_t begin;
  std::size_t end;  // excluding the newline
};

std::vector<LineRef> lines_of(std::string_view s) {
  std::vector<LineRef> out;
  std::size_t b = 0;
  while (b <= s.size()) {
    auto nl = s.find('\n', b);
    auto e = nl == std::string_view::npos ? s.size() : nl;
    out.push_back({b, e});
    if (nl == std::string_view::npos) break;
    b = nl + 1;
  }
  return out;
}

// Returns the text after "TOOL:" when the line is a tool line.
std::optional<std::string_view> tool_payload(std::string_view line) {
  auto t = text::trim(line);
  if (!t.starts_with("TOOL")) return std::nullopt;
  auto rest = text::trim(t.substr(4));
  if (!rest.starts_with(':')) return std::nullopt;
  return text::trim(rest.substr(1));
}

std::chrono::sys_days need_date(std::string_view s) {
  auto d = parse_iso_date(text::trim(s));
  if (!d) throw Error(Errc::BadDate, "not a YYYY-MM-DD date: '" + std::string(s) + "'");
  return *d;
}

long long abs_days(std::string_view a, std::string_view b) {
  return std::llabs((need_date(a) - need_date(b)).count());
}

}  // namespace

std::optional<std::size_t> tool_arity(std::string_view name) {
  if (name == "days_between" || name == "weeks_between" || name == "months_between") return 2;
  if (name == "count_occurrences") return 1;
  return std::nullopt;
}

std::optional<ToolCall> parse_tool_call(std::string_view out) {
  for (const auto& l : lines_of(out)) {
    auto payload = tool_payload(out.substr(l.begin, l.end - l.begin));
    if (!payload) continue;
    auto parts = text::split(*payload, '|');
    ToolCall call;
    call.name = std::string(text::trim(parts.front()));
    for (std::size_t i = 1; i < parts.size(); ++i) call.args.emplace_back(text::trim(parts[i]));
    auto arity = tool_arity(call.name);
    if (!arity || *arity != call.args.size()) return std::nullopt;
    if (std::any_of(call.args.begin(), call.args.end(), [](const std::string& a) { return a.empty(); }))
      return std::nullopt;
    return call;
  }
  return std::nullopt;
}

std::string days_between(std::string_view d1, std::string_view d2) { return std::to_string(abs_days(d1, d2)); }

std::string weeks_between(std::string_view d1, std::string_view d2) { return std::to_string(abs_days(d1, d2) / 7); }

std::string months_between(std::string_view d1, std::string_view d2) {
  auto a = need_date(d1), b = need_date(d2);
  if (b < a) std::swap(a, b);
  std::chrono::year_month_day ya{a}, yb{b};
  int months = (static_cast<int>(yb.year()) - static_cast<int>(ya.year())) * 12 +
               (static_cast<int>(static_cast<unsigned>(yb.month())) - static_cast<int>(static_cast<unsigned>(ya.month())));
  // A month only counts once the anchor day has been reached.
  if (yb.day() < ya.day()) --months;
  return std::to_string(std::max(months, 0));
}

std::string count_occurrences(std::string_view keyword, std::string_view context) {
  return std::to_string(text::count_bounded(context, text::trim(keyword)));
}

ToolResult execute_tool(const ToolCall& call, std::string_view context) {
  ToolResult r;
  r.call = call;
  auto arity = tool_arity(call.name);
  if (!arity || *arity != call.args.size()) throw std::invalid_argument("unregistered tool call: " + call.name);
  try {
    if (call.name == "days_between") r.value = days_between(call.args[0], call.args[1]);
    else if (call.name == "weeks_between") r.value = weeks_between(call.args[0], call.args[1]);
    else if (call.name == "months_between") r.value = months_between(call.args[0], call.args[1]);
    else r.value = count_occurrences(call.args[0], context);
  } catch (const Error& e) {
    if (e.code() != Errc::BadDate) throw;
    r.value = std::string(kBadDateValue);
  }
  r.rendered = "TOOL_RESULT: " + r.value;
  return r;
}

std::string strip_tool_lines(std::string_view s) {
  std::vector<std::string> kept;
  for (const auto& l : lines_of(s)) {
    auto line = s.substr(l.begin, l.end - l.begin);
    if (!tool_payload(line)) kept.emplace_back(line);
  }
  return std::string(text::trim(text::join(kept, "\n")));
}

std::optional<std::size_t> end_of_tool_line(std::string_view s) {
  for (const auto& l : lines_of(s)) {
    if (tool_payload(s.substr(l.begin, l.end - l.begin))) return l.end;
  }
  return std::nullopt;
}

}  // namespace memflow
