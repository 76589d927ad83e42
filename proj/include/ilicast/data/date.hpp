#pragma once

#include "ilicast/core/errors.hpp"

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

namespace ilicast::data {

using Date = std::chrono::sys_days;
using Days = std::chrono::days;

inline Date make_date(int y, unsigned m, unsigned d) {
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) {
        throw InvalidInput("invalid calendar date " + std::to_string(y) + "-" + std::to_string(m) + "-" +
                           std::to_string(d));
    }
    return Date{ymd};
}

/// Parses YYYY-MM-DD.
inline Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw InvalidInput("expected an ISO-8601 date (YYYY-MM-DD), got '" + std::string(text) + "'");
    }
    auto digits = [&](std::size_t from, std::size_t len) {
        int v = 0;
        for (std::size_t i = from; i < from + len; ++i) {
            if (text[i] < '0' || text[i] > '9') {
                throw InvalidInput("expected an ISO-8601 date (YYYY-MM-DD), got '" + std::string(text) + "'");
            }
            v = v * 10 + (text[i] - '0');
        }
        return v;
    };
    return make_date(digits(0, 4), static_cast<unsigned>(digits(5, 2)), static_cast<unsigned>(digits(8, 2)));
}

inline std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

inline long days_between(Date from, Date to) { return static_cast<long>((to - from).count()); }

inline int year_of(Date d) { return static_cast<int>(std::chrono::year_month_day{d}.year()); }
inline unsigned month_of(Date d) { return static_cast<unsigned>(std::chrono::year_month_day{d}.month()); }
inline unsigned day_of(Date d) { return static_cast<unsigned>(std::chrono::year_month_day{d}.day()); }

inline bool is_leap(int y) { return std::chrono::year{y}.is_leap(); }

inline bool is_thursday(Date d) { return std::chrono::weekday{d} == std::chrono::Thursday; }

/// The Thursday within the seven days ending on `week_end`.
inline Date thursday_of_week_ending(Date week_end) {
    for (int back = 0; back < 7; ++back) {
        const Date d = week_end - Days{back};
        if (is_thursday(d)) {
            return d;
        }
    }
    return week_end; // unreachable
}

/// Latest Thursday on or before `d`.
inline Date thursday_on_or_before(Date d) { return thursday_of_week_ending(d); }

/// Same month/day in `year`; Feb 29 maps to Feb 28 in non-leap years.
inline Date same_day_in_year(Date d, int year) {
    unsigned m = month_of(d);
    unsigned day = day_of(d);
    if (m == 2 && day == 29 && !is_leap(year)) {
        day = 28;
    }
    return make_date(year, m, day);
}

/// First day of the test season starting on August 23 of `year`.
inline Date season_start(int year) { return make_date(year, 8, 23); }
/// Last day of that season (August 22 of the following year).
inline Date season_end(int year) { return make_date(year + 1, 8, 22); }

} // namespace ilicast::data
