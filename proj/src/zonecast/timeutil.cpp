#include "zonecast/timeutil.hpp"

#include <cstdio>

namespace zonecast::timeutil {

std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& year, int& month, int& day) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    year = static_cast<int>(y + (month <= 2));
}

int weekday_monday0(std::int64_t epoch_days) {
    // 1970-01-01 was a Thursday (index 3 with Monday = 0).
    std::int64_t w = (epoch_days + 3) % 7;
    if (w < 0) w += 7;
    return static_cast<int>(w);
}

namespace {

bool parse_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    if (pos + n > s.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

bool days_in_month_ok(int y, int m, int d) {
    static const int md[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m < 1 || m > 12 || d < 1) return false;
    int lim = md[m - 1];
    if (m == 2) {
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        if (leap) lim = 29;
    }
    return d <= lim;
}

// Parses the shared "YYYY-MM-DDTHH" prefix; returns epoch hours or nullopt.
std::optional<std::int64_t> parse_hour_prefix(std::string_view s, std::size_t& consumed) {
    int y, mo, d, h;
    if (!parse_digits(s, 0, 4, y)) return std::nullopt;
    if (s.size() < 13 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!parse_digits(s, 5, 2, mo) || !parse_digits(s, 8, 2, d)) return std::nullopt;
    if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
    if (!parse_digits(s, 11, 2, h)) return std::nullopt;
    if (!days_in_month_ok(y, mo, d) || h > 23) return std::nullopt;
    consumed = 13;
    return days_from_civil(y, mo, d) * 24 + h;
}

}  // namespace

std::optional<std::int64_t> parse_minute_utc(std::string_view s) {
    std::size_t consumed = 0;
    const auto hours = parse_hour_prefix(s, consumed);
    if (!hours) return std::nullopt;
    if (s.size() < consumed + 3 || s[consumed] != ':') return std::nullopt;
    int mi;
    if (!parse_digits(s, consumed + 1, 2, mi) || mi > 59) return std::nullopt;
    consumed += 3;
    if (consumed != s.size()) {
        // Optional ":SS" tail, ignored.
        if (s.size() != consumed + 3 || s[consumed] != ':') return std::nullopt;
        int sec;
        if (!parse_digits(s, consumed + 1, 2, sec) || sec > 59) return std::nullopt;
    }
    return *hours * 60 + mi;
}

std::optional<std::int64_t> parse_hour_utc(std::string_view s) {
    std::size_t consumed = 0;
    const auto hours = parse_hour_prefix(s, consumed);
    if (!hours) return std::nullopt;
    if (consumed == s.size()) return hours;
    const auto minutes = parse_minute_utc(s);
    if (!minutes) return std::nullopt;
    return *minutes / 60;
}

std::string format_hour_utc(std::int64_t epoch_hours) {
    std::int64_t days = epoch_hours / 24;
    int h = static_cast<int>(epoch_hours % 24);
    if (h < 0) {
        h += 24;
        --days;
    }
    int y, mo, d;
    civil_from_days(days, y, mo, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d", y, mo, d, h);
    return buf;
}

std::string format_minute_utc(std::int64_t epoch_minutes) {
    std::int64_t hours = epoch_minutes / 60;
    int mi = static_cast<int>(epoch_minutes % 60);
    if (mi < 0) {
        mi += 60;
        --hours;
    }
    return format_hour_utc(hours) + ":" + std::string{char('0' + mi / 10), char('0' + mi % 10)};
}

int hour_of_week(std::int64_t local_epoch_hours) {
    std::int64_t days = local_epoch_hours / 24;
    int h = static_cast<int>(local_epoch_hours % 24);
    if (h < 0) {
        h += 24;
        --days;
    }
    return 24 * weekday_monday0(days) + h + 1;
}

}  // namespace zonecast::timeutil
