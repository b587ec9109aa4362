#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dearfed {

/// Hours since 1970-01-01T00:00Z.
using HourStamp = std::int64_t;
/// Days since 1970-01-01.
using DayStamp = std::int64_t;

/// Accepts "YYYY-MM-DDTHH:MM:SSZ", "YYYY-MM-DDTHH:MM:SS", "YYYY-MM-DDTHH:MM"
/// and the same with a space separator. Minutes and seconds must be zero.
HourStamp parse_iso_hour(std::string_view text);
/// "YYYY-MM-DDTHH:00:00Z".
std::string format_iso_hour(HourStamp h);

DayStamp parse_iso_date(std::string_view text);
std::string format_iso_date(DayStamp d);
DayStamp make_day(int year, unsigned month, unsigned day);

inline DayStamp day_of(HourStamp h) { return h >= 0 ? h / 24 : (h - 23) / 24; }
inline int hour_of_day(HourStamp h) { return static_cast<int>(h - day_of(h) * 24); }
/// Monday = 0 ... Sunday = 6.
int weekday(DayStamp d);
int year_of(DayStamp d);
unsigned month_of(DayStamp d);

DayStamp easter_sunday(int year);
/// Finnish public holidays of one year, sorted.
std::vector<DayStamp> finnish_holidays(int year);
/// Finnish public holidays intersecting [first, last], sorted.
std::vector<DayStamp> finnish_holidays_between(DayStamp first, DayStamp last);

}  // namespace dearfed
