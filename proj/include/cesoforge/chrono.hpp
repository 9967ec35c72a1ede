#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace cesoforge {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Date = std::chrono::year_month_day;

/// Calendar month used as the bucket grain for statistics and trends.
struct YearMonth {
    int year = 1970;
    unsigned month = 1;  // 1..12

    auto operator<=>(const YearMonth&) const = default;

    YearMonth next() const noexcept;
    /// Number of months from `*this` to `other` (negative when other is earlier).
    int months_until(const YearMonth& other) const noexcept;

    static YearMonth of(const Date& d) noexcept;
    static std::optional<YearMonth> parse(std::string_view text);
    std::string str() const;  // "YYYY-MM"
};

/// RFC 3339 UTC with millisecond precision, e.g. "2021-01-05T00:00:00.000Z".
std::string format_timestamp(Timestamp ts);
std::optional<Timestamp> parse_timestamp(std::string_view text);

std::string format_date(const Date& d);  // "YYYY-MM-DD"
std::optional<Date> parse_date(std::string_view text);

Timestamp start_of_day(const Date& d);
Date date_of(Timestamp ts);

}  // namespace cesoforge
