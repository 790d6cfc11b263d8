#pragma once

#include <compare>
#include <cstdio>
#include <string>

#include "gcnet/error.hpp"

namespace gcnet {

// Calendar date, ISO-8601 text form YYYY-MM-DD.
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    static Date parse(const std::string& s) {
        Date d;
        char dash1 = 0, dash2 = 0;
        if (std::sscanf(s.c_str(), "%d%c%d%c%d", &d.year, &dash1, &d.month, &dash2,
                        &d.day) != 5 ||
            dash1 != '-' || dash2 != '-' || d.month < 1 || d.month > 12 ||
            d.day < 1 || d.day > 31) {
            throw ParseError("invalid date: '" + s + "'");
        }
        return d;
    }

    // Days since civil epoch 1970-01-01 (proleptic Gregorian).
    long serial() const {
        long y = year;
        const unsigned m = static_cast<unsigned>(month);
        const unsigned d = static_cast<unsigned>(day);
        y -= m <= 2;
        const long era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + static_cast<long>(doe) - 719468;
    }

    static Date from_serial(long z) {
        z += 719468;
        const long era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const long y = static_cast<long>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp + (mp < 10 ? 3 : -9);
        return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                    static_cast<int>(d)};
    }

    // Next Monday..Friday day after this one.
    Date next_weekday() const {
        long s = serial() + 1;
        while (true) {
            // 1970-01-01 was a Thursday; weekday 0 = Thursday here.
            const long wd = ((s % 7) + 7) % 7;  // 2 = Saturday, 3 = Sunday
            if (wd != 2 && wd != 3) return from_serial(s);
            ++s;
        }
    }
};

}  // namespace gcnet
