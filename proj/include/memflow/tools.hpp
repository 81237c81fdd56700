#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memflow {

struct ToolCall {
  std::string name;  // days_between | weeks_between | months_between | count_occurrences
  std::vector<std::string> args;

  bool operator==(const ToolCall&) const = default;
};

struct ToolResult {
  ToolCall call;
  std::string value;
  std::string rendered;  // "TOOL_RESULT: <value>"

  bool operator==(const ToolResult&) const = default;
};

inline constexpr std::string_view kBadDateValue = "ERROR bad date";

/// Number of arguments a registered tool takes, or nothing for unknown names.
std::optional<std::size_t> tool_arity(std::string_view name);

/// First line of the form "TOOL: <name> | <arg> [| <arg>]". Unknown names
/// and wrong arity yield nothing.
std::optional<ToolCall> parse_tool_call(std::string_view model_output);

/// Throw Error{BadDate} on arguments that are not YYYY-MM-DD calendar dates.
std::string days_between(std::string_view d1, std::string_view d2);
std::string weeks_between(std::string_view d1, std::string_view d2);
std::string months_between(std::string_view d1, std::string_view d2);

std::string count_occurrences(std::string_view keyword, std::string_view context);

/// Bad dates render as "TOOL_RESULT: ERROR bad date" so the model can recover.
ToolResult execute_tool(const ToolCall& call, std::string_view context);

/// Removes every line that starts with "TOOL:".
std::string strip_tool_lines(std::string_view text);

/// Byte offset just past the first TOOL line, if any.
std::optional<std::size_t> end_of_tool_line(std::string_view text);

}  // namespace memflow
