#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace upho {

using Date = std::chrono::sys_days;

/// Strict `YYYY-MM-DD`; returns nullopt on any malformed or impossible date.
std::optional<Date> parse_date(std::string_view text);

/// Like parse_date but throws Error(ParseError).
Date parse_date_or_throw(std::string_view text);

std::string format_date(Date d);

/// Monday on or before `d` (ISO week start).
Date week_start(Date d);

enum class Calendar { Daily, Weekly };

inline Date bin_start(Date d, Calendar cal) { return cal == Calendar::Weekly ? week_start(d) : d; }

inline int bin_width_days(Calendar cal) { return cal == Calendar::Weekly ? 7 : 1; }

std::string_view to_string(Calendar cal);
std::optional<Calendar> try_parse_calendar(std::string_view text);
Calendar parse_calendar(std::string_view text);

}  // namespace upho
