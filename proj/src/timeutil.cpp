#include "dearfed/timeutil.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <stdexcept>

namespace dearfed {

namespace chr = std::chrono;

namespace {

int read_int(std::string_view s, std::size_t pos, std::size_t len, std::string_view whole) {
  int v = 0;
  if (pos + len > s.size()) throw std::invalid_argument("bad timestamp '" + std::string(whole) + "'");
  const char* b = s.data() + pos;
  auto [p, ec] = std::from_chars(b, b + len, v);
  if (ec != std::errc() || p != b + len) {
    throw std::invalid_argument("bad timestamp '" + std::string(whole) + "'");
  }
  return v;
}

chr::year_month_day civil(DayStamp d) { return chr::year_month_day{chr::sys_days{chr::days{d}}}; }

}  // namespace

DayStamp make_day(int year, unsigned month, unsigned day) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) {
    throw std::invalid_argument("invalid date " + std::to_string(year) + "-" +
                                std::to_string(month) + "-" + std::to_string(day));
  }
  return chr::sys_days{ymd}.time_since_epoch().count();
}

DayStamp parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw std::invalid_argument("bad date '" + std::string(text) + "'");
  }
  return make_day(read_int(text, 0, 4, text), static_cast<unsigned>(read_int(text, 5, 2, text)),
                  static_cast<unsigned>(read_int(text, 8, 2, text)));
}

std::string format_iso_date(DayStamp d) {
  const auto ymd = civil(d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

HourStamp parse_iso_hour(std::string_view text) {
  std::string_view s = text;
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() != 16 && s.size() != 19) throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
  if (s[10] != 'T' && s[10] != ' ') throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
  const DayStamp day = parse_iso_date(s.substr(0, 10));
  if (s[13] != ':') throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
  const int hour = read_int(s, 11, 2, text);
  const int minute = read_int(s, 14, 2, text);
  const int second = s.size() == 19 ? read_int(s, 17, 2, text) : 0;
  if (s.size() == 19 && s[16] != ':') throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
  if (hour > 23 || minute != 0 || second != 0) {
    throw std::invalid_argument("timestamp '" + std::string(text) + "' is not on a whole hour");
  }
  return day * 24 + hour;
}

std::string format_iso_hour(HourStamp h) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", hour_of_day(h));
  return format_iso_date(day_of(h)) + "T" + buf + ":00:00Z";
}

int weekday(DayStamp d) {
  return static_cast<int>(chr::weekday{chr::sys_days{chr::days{d}}}.iso_encoding()) - 1;
}

int year_of(DayStamp d) { return static_cast<int>(civil(d).year()); }
unsigned month_of(DayStamp d) { return static_cast<unsigned>(civil(d).month()); }

DayStamp easter_sunday(int y) {
  // Anonymous Gregorian algorithm (Meeus/Jones/Butcher).
  const int a = y % 19, b = y / 100, c = y % 100, d = b / 4, e = b % 4;
  const int f = (b + 8) / 25, g = (b - f + 1) / 3;
  const int h = (19 * a + b - d - g + 15) % 30;
  const int i = c / 4, k = c % 4;
  const int l = (32 + 2 * e + 2 * i - h - k) % 7;
  const int m = (a + 11 * h + 22 * l) / 451;
  const int month = (h + l - 7 * m + 114) / 31;
  const int day = (h + l - 7 * m + 114) % 31 + 1;
  return make_day(y, static_cast<unsigned>(month), static_cast<unsigned>(day));
}

std::vector<DayStamp> finnish_holidays(int year) {
  const DayStamp easter = easter_sunday(year);
  // Midsummer Eve: the Friday between 19 and 25 June.
  DayStamp midsummer = make_day(year, 6, 19);
  while (weekday(midsummer) != 4) ++midsummer;
  // All Saints' Day: the Saturday between 31 October and 6 November.
  DayStamp all_saints = make_day(year, 10, 31);
  while (weekday(all_saints) != 5) ++all_saints;
  std::vector<DayStamp> out = {
      make_day(year, 1, 1),  make_day(year, 1, 6),   easter - 2,  easter,
      easter + 1,            make_day(year, 5, 1),   easter + 39, midsummer,
      midsummer + 1,         all_saints,             make_day(year, 12, 6),
      make_day(year, 12, 24), make_day(year, 12, 25), make_day(year, 12, 26),
  };
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<DayStamp> finnish_holidays_between(DayStamp first, DayStamp last) {
  std::vector<DayStamp> out;
  for (int y = year_of(first); y <= year_of(last); ++y) {
    for (DayStamp d : finnish_holidays(y)) {
      if (d >= first && d <= last) out.push_back(d);
    }
  }
  return out;
}

}  // namespace dearfed
