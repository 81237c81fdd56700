#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memflow {

using Timestamp = std::chrono::sys_seconds;

/// Accepts ISO-8601 dates and date-times (with optional Z or numeric
/// offset, normalized to UTC), "YYYY/MM/DD (Ddd) HH:MM", "Month D, YYYY",
/// "D Month YYYY" and "H:MM am on D Month, YYYY". A missing time of day is
/// 00:00:00.
std::optional<Timestamp> parse_timestamp(std::string_view s);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso(Timestamp ts);
/// "YYYY-MM-DD"
std::string format_date(Timestamp ts);
std::string format_date(std::chrono::sys_days d);

/// Strict "YYYY-MM-DD" with calendar validation.
std::optional<std::chrono::sys_days> parse_iso_date(std::string_view s);

/// 1-based month number for an English month name or 3-letter abbreviation.
std::optional<unsigned> month_from_name(std::string_view name);

/// Absolute dates mentioned in free text, normalized to YYYY-MM-DD, in order
/// of first appearance. Recognizes ISO dates, "Month DD, YYYY" and
/// "MM/DD/YYYY". Relative expressions are ignored.
std::vector<std::string> extract_date_labels(std::string_view text);

}  // namespace memflow
