#include "upho/date.hpp"

#include <cstdio>

#include "upho/error.hpp"

namespace upho {

namespace {

bool all_digits(std::string_view s) {
    for (char c : s) {
        if (c < '0' || c > '9') {
            return false;
        }
    }
    return !s.empty();
}

int to_int(std::string_view s) {
    int v = 0;
    for (char c : s) {
        v = v * 10 + (c - '0');
    }
    return v;
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        return std::nullopt;
    }
    auto ys = text.substr(0, 4);
    auto ms = text.substr(5, 2);
    auto ds = text.substr(8, 2);
    if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) {
        return std::nullopt;
    }
    std::chrono::year_month_day ymd{std::chrono::year{to_int(ys)},
                                    std::chrono::month{static_cast<unsigned>(to_int(ms))},
                                    std::chrono::day{static_cast<unsigned>(to_int(ds))}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return Date{ymd};
}

Date parse_date_or_throw(std::string_view text) {
    auto d = parse_date(text);
    if (!d) {
        throw Error(Errc::ParseError, "invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
    }
    return *d;
}

std::string format_date(Date d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

Date week_start(Date d) {
    std::chrono::weekday wd{d};
    return d - std::chrono::days{wd.iso_encoding() - 1};
}

std::string_view to_string(Calendar cal) { return cal == Calendar::Weekly ? "weekly" : "daily"; }

std::optional<Calendar> try_parse_calendar(std::string_view text) {
    if (text == "daily") {
        return Calendar::Daily;
    }
    if (text == "weekly") {
        return Calendar::Weekly;
    }
    return std::nullopt;
}

Calendar parse_calendar(std::string_view text) {
    if (auto c = try_parse_calendar(text)) {
        return *c;
    }
    throw Error(Errc::InvalidArgument, "calendar must be daily or weekly, got '" + std::string(text) + "'");
}

}  // namespace upho
