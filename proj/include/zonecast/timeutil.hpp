#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace zonecast::timeutil {

/// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(int year, int month, int day);

/// Inverse of days_from_civil.
void civil_from_days(std::int64_t days, int& year, int& month, int& day);

/// Day of week with Monday = 0 ... Sunday = 6.
int weekday_monday0(std::int64_t epoch_days);

/// Parses "YYYY-MM-DDTHH:MM" (optionally with ":SS", seconds ignored) into
/// minutes since epoch. Returns nullopt on malformed input or out-of-range
/// fields.
std::optional<std::int64_t> parse_minute_utc(std::string_view s);

/// Parses an hour bucket "YYYY-MM-DDTHH" into hours since epoch. Also accepts
/// the full minute form, truncating to the hour.
std::optional<std::int64_t> parse_hour_utc(std::string_view s);

std::string format_hour_utc(std::int64_t epoch_hours);
std::string format_minute_utc(std::int64_t epoch_minutes);

/// Hour-of-week slot in [1, 168] for an epoch-hour that has already been
/// shifted to local time. Monday 00:xx maps to 1, Sunday 23:xx to 168.
int hour_of_week(std::int64_t local_epoch_hours);

}  // namespace zonecast::timeutil
