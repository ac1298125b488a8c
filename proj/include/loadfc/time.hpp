#pragma once

#include "loadfc/error.hpp"

#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

namespace loadfc {

using Timestamp = std::chrono::sys_seconds;
using Duration = std::chrono::seconds;

namespace detail {

inline bool parse_uint(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        const char c = s[i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

} // namespace detail

/// Parses `YYYY-MM-DD[T| ]HH:MM[:SS][Z|+00:00]`. Only UTC designators are
/// accepted because every file in this toolkit is written in UTC.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    using namespace std::chrono;
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (s.size() < 16 || !detail::parse_uint(s, 0, 4, y) || s[4] != '-' || !detail::parse_uint(s, 5, 2, mo) ||
        s[7] != '-' || !detail::parse_uint(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') ||
        !detail::parse_uint(s, 11, 2, h) || s[13] != ':' || !detail::parse_uint(s, 14, 2, mi))
        return std::nullopt;
    std::size_t pos = 16;
    if (pos < s.size() && s[pos] == ':') {
        if (!detail::parse_uint(s, pos + 1, 2, sec)) return std::nullopt;
        pos += 3;
    }
    const std::string_view rest = s.substr(pos);
    if (!(rest.empty() || rest == "Z" || rest == "+00:00" || rest == "+0000")) return std::nullopt;
    if (h > 23 || mi > 59 || sec > 59) return std::nullopt;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return Timestamp{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{sec};
}

inline std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto day_point = floor<days>(t);
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{t - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

inline std::optional<std::chrono::year_month_day> parse_date(std::string_view s) {
    using namespace std::chrono;
    int y = 0, mo = 0, d = 0;
    if (s.size() != 10 || !detail::parse_uint(s, 0, 4, y) || s[4] != '-' || !detail::parse_uint(s, 5, 2, mo) ||
        s[7] != '-' || !detail::parse_uint(s, 8, 2, d))
        return std::nullopt;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
}

inline std::string format_date(std::chrono::year_month_day ymd) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

/// Calendar fields of a timestamp in local civil time.
struct CivilTime {
    std::chrono::year_month_day date;
    unsigned month = 1;   // 1..12
    unsigned weekday = 0; // 0 = Monday .. 6 = Sunday
    int hour = 0;
    int minute = 0;

    bool is_weekend() const noexcept { return weekday >= 5; }
};

/// A POSIX-rule time zone (`CET-1CEST,M3.5.0,M10.5.0/3`). Named IANA zones are
/// resolved through the rule footer of the system TZif file, which describes
/// the zone's current offsets; historical rule changes are not modelled.
class TimeZone {
public:
    static TimeZone utc() { return TimeZone{}; }

    static TimeZone from_posix(const std::string& rule, std::string name = {}) {
        TimeZone tz;
        tz.name_ = name.empty() ? rule : std::move(name);
        tz.parse_posix(rule);
        return tz;
    }

    /// Resolves an IANA name ("Europe/Madrid") via $TZDIR or /usr/share/zoneinfo.
    static TimeZone from_name(const std::string& name) {
        if (name.empty() || name == "UTC" || name == "Etc/UTC") return utc();
        const char* env = std::getenv("TZDIR");
        const std::string dir = env ? env : "/usr/share/zoneinfo";
        std::ifstream in(dir + "/" + name, std::ios::binary);
        if (!in) throw Error(ErrorKind::Config, "unknown time zone '" + name + "'");
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (bytes.size() < 4 || bytes.compare(0, 4, "TZif") != 0)
            throw Error(ErrorKind::Config, "time zone file for '" + name + "' is not TZif");
        // The footer is "\n<posix rule>\n" at the very end of v2+ files.
        if (bytes.back() != '\n') throw Error(ErrorKind::Config, "time zone '" + name + "' has no rule footer");
        const auto open = bytes.rfind('\n', bytes.size() - 2);
        if (open == std::string::npos) throw Error(ErrorKind::Config, "time zone '" + name + "' has no rule footer");
        const std::string rule = bytes.substr(open + 1, bytes.size() - open - 2);
        if (rule.empty()) throw Error(ErrorKind::Config, "time zone '" + name + "' has an empty rule footer");
        return from_posix(rule, name);
    }

    const std::string& name() const noexcept { return name_; }

    /// UTC offset in effect at instant `t`.
    Duration offset_at(Timestamp t) const {
        if (!has_dst_) return std_offset_;
        using namespace std::chrono;
        const year_month_day ymd{floor<days>(t + std_offset_)};
        const Timestamp start = transition_utc(ymd.year(), dst_start_) - std_offset_;
        const Timestamp end = transition_utc(ymd.year(), dst_end_) - dst_offset_;
        const bool in_dst = start < end ? (t >= start && t < end) : (t >= start || t < end);
        return in_dst ? dst_offset_ : std_offset_;
    }

    CivilTime civil(Timestamp t) const {
        using namespace std::chrono;
        const Timestamp local = t + offset_at(t);
        const auto day_point = floor<days>(local);
        const hh_mm_ss hms{local - day_point};
        CivilTime c;
        c.date = year_month_day{day_point};
        c.month = static_cast<unsigned>(c.date.month());
        c.weekday = (weekday{day_point}.c_encoding() + 6) % 7;
        c.hour = static_cast<int>(hms.hours().count());
        c.minute = static_cast<int>(hms.minutes().count());
        return c;
    }

private:
    struct Rule {
        unsigned month = 1, week = 1, wday = 0; // Mm.w.d, wday 0 = Sunday
        Duration time{7200};
    };

    // Local wall-clock instant (expressed as sys time) at which the rule fires.
    static Timestamp transition_utc(std::chrono::year y, const Rule& r) {
        using namespace std::chrono;
        const sys_days first{y / month{r.month} / 1};
        const unsigned first_wd = weekday{first}.c_encoding();
        unsigned dom = 1 + (r.wday + 7 - first_wd) % 7 + 7 * (r.week - 1);
        const unsigned month_days = static_cast<unsigned>(year_month_day_last{y / month{r.month} / last}.day());
        while (dom > month_days) dom -= 7;
        return Timestamp{first + days{dom - 1}} + r.time;
    }

    void parse_posix(const std::string& s) {
        std::size_t pos = 0;
        auto fail = [&] { throw Error(ErrorKind::Config, "unsupported time zone rule '" + s + "'"); };
        auto skip_name = [&] {
            if (pos < s.size() && s[pos] == '<') {
                const auto close = s.find('>', pos);
                if (close == std::string::npos) fail();
                pos = close + 1;
                return;
            }
            const auto begin = pos;
            while (pos < s.size() && std::isalpha(static_cast<unsigned char>(s[pos]))) ++pos;
            if (pos - begin < 3) fail();
        };
        auto parse_hms = [&](bool allow_sign) {
            int sign = 1;
            if (allow_sign && pos < s.size() && (s[pos] == '+' || s[pos] == '-')) sign = s[pos++] == '-' ? -1 : 1;
            long parts[3] = {0, 0, 0};
            for (int k = 0; k < 3; ++k) {
                const auto begin = pos;
                while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
                if (pos == begin) fail();
                parts[k] = std::stol(s.substr(begin, pos - begin));
                if (pos < s.size() && s[pos] == ':') ++pos;
                else break;
            }
            return Duration{sign * (parts[0] * 3600 + parts[1] * 60 + parts[2])};
        };
        auto parse_rule = [&] {
            Rule r;
            if (pos >= s.size() || s[pos] != 'M') fail();
            ++pos;
            const auto read_int = [&] {
                const auto begin = pos;
                while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
                if (pos == begin) fail();
                return static_cast<unsigned>(std::stoul(s.substr(begin, pos - begin)));
            };
            r.month = read_int();
            if (pos >= s.size() || s[pos++] != '.') fail();
            r.week = read_int();
            if (pos >= s.size() || s[pos++] != '.') fail();
            r.wday = read_int();
            if (r.month < 1 || r.month > 12 || r.week < 1 || r.week > 5 || r.wday > 6) fail();
            if (pos < s.size() && s[pos] == '/') {
                ++pos;
                r.time = parse_hms(true);
            }
            return r;
        };

        skip_name();
        std_offset_ = -parse_hms(true); // POSIX offsets are west-positive
        if (pos == s.size()) return;
        skip_name();
        dst_offset_ = std_offset_ + Duration{3600};
        if (pos < s.size() && s[pos] != ',') dst_offset_ = -parse_hms(true);
        if (pos >= s.size() || s[pos++] != ',') fail();
        dst_start_ = parse_rule();
        if (pos >= s.size() || s[pos++] != ',') fail();
        dst_end_ = parse_rule();
        if (pos != s.size()) fail();
        has_dst_ = true;
    }

    std::string name_ = "UTC";
    Duration std_offset_{0};
    Duration dst_offset_{0};
    bool has_dst_ = false;
    Rule dst_start_;
    Rule dst_end_;
};

} // namespace loadfc
