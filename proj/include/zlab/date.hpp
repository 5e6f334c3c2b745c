#pragma once

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace zlab {

// Calendar date; ordered and printable as YYYY-MM-DD.
struct Date {
  std::chrono::sys_days day{};

  static std::optional<Date> parse(std::string_view s) {
    // Accept "YYYY-MM-DD" and anything that starts with it (timestamps).
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y = 0;
    unsigned m = 0, d = 0;
    for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
    y = (s[0] - '0') * 1000 + (s[1] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0');
    m = static_cast<unsigned>((s[5] - '0') * 10 + (s[6] - '0'));
    d = static_cast<unsigned>((s[8] - '0') * 10 + (s[9] - '0'));
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return Date{std::chrono::sys_days{ymd}};
  }

  // The n-th business day (Mon-Fri) counting from Monday 2000-01-03 as 0.
  static Date business_day(long n) {
    using namespace std::chrono;
    const sys_days origin{year_month_day{year{2000}, January, std::chrono::day{3}}};
    return Date{origin + days{7 * (n / 5) + n % 5}};
  }

  std::string str() const {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
  }

  friend auto operator<=>(const Date&, const Date&) = default;
};

}  // namespace zlab
