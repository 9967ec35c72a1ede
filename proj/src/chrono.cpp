#include "cesoforge/chrono.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

namespace cesoforge {

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    }
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc{};
}

}  // namespace

YearMonth YearMonth::next() const noexcept {
    if (month == 12) return {year + 1, 1};
    return {year, month + 1};
}

int YearMonth::months_until(const YearMonth& other) const noexcept {
    return (other.year - year) * 12 + (static_cast<int>(other.month) - static_cast<int>(month));
}

YearMonth YearMonth::of(const Date& d) noexcept {
    return {static_cast<int>(d.year()), static_cast<unsigned>(d.month())};
}

std::optional<YearMonth> YearMonth::parse(std::string_view text) {
    int y = 0;
    int m = 0;
    if (text.size() != 7 || text[4] != '-') return std::nullopt;
    if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, m)) return std::nullopt;
    if (m < 1 || m > 12) return std::nullopt;
    return YearMonth{y, static_cast<unsigned>(m)};
}

std::string YearMonth::str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u", year, month);
    return buf;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::optional<Date> parse_date(std::string_view text) {
    int y = 0;
    int m = 0;
    int d = 0;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, m) || !read_int(text, 8, 2, d)) {
        return std::nullopt;
    }
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

Timestamp start_of_day(const Date& d) {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::sys_days{d});
}

Date date_of(Timestamp ts) {
    return Date{std::chrono::floor<std::chrono::days>(ts)};
}

std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const auto day = floor<days>(ts);
    const Date ymd{day};
    const hh_mm_ss hms{ts - day};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()),
                  static_cast<int>(hms.subseconds().count()));
    return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    auto date = parse_date(text);
    if (!date) return std::nullopt;
    if (text.size() == 10) return start_of_day(*date);
    if (text.size() < 20 || (text[10] != 'T' && text[10] != 't') || text[13] != ':' ||
        text[16] != ':') {
        return std::nullopt;
    }
    int hh = 0;
    int mm = 0;
    int ss = 0;
    if (!read_int(text, 11, 2, hh) || !read_int(text, 14, 2, mm) || !read_int(text, 17, 2, ss)) {
        return std::nullopt;
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    std::size_t pos = 19;
    int millis = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        int digits = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            if (digits < 3) millis = millis * 10 + (text[pos] - '0');
            ++digits;
            ++pos;
        }
        if (digits == 0) return std::nullopt;
        for (int i = digits; i < 3; ++i) millis *= 10;
    }
    if (pos + 1 != text.size() || (text[pos] != 'Z' && text[pos] != 'z')) return std::nullopt;
    return start_of_day(*date) + hours{hh} + minutes{mm} + seconds{ss} + milliseconds{millis};
}

}  // namespace cesoforge
