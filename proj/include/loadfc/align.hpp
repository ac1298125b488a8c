#pragma once

#include "loadfc/error.hpp"
#include "loadfc/series.hpp"
#include "loadfc/time.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace loadfc {

struct HourlyResample {
    LoadSeries series;
    std::vector<int> support; // available quarter-hours behind each hour (0..4)
};

/// Averages quarter-hour readings into hours aligned on the UTC hour; an hour
/// with no available quarter is missing.
inline HourlyResample resample_to_hourly_with_support(const LoadSeries& s) {
    if (s.cadence() != Cadence::QuarterHour)
        throw Error(ErrorKind::Config, "resample_to_hourly expects a 15-minute series");
    using namespace std::chrono;
    HourlyResample out;
    if (s.empty()) {
        out.series = LoadSeries(s.consumer_id(), floor<hours>(s.start()), Cadence::Hour, {});
        return out;
    }
    const Timestamp first_hour = floor<hours>(s.start());
    const Timestamp last_hour = floor<hours>(s.time_at(s.size() - 1));
    const auto n = static_cast<std::size_t>((last_hour - first_hour).count() / 3600) + 1;
    std::vector<double> sums(n, 0.0);
    out.support.assign(n, 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.is_missing(i)) continue;
        const auto h = static_cast<std::size_t>((s.time_at(i) - first_hour).count() / 3600);
        sums[h] += s[i];
        ++out.support[h];
    }
    std::vector<double> values(n);
    std::vector<bool> missing(n);
    for (std::size_t h = 0; h < n; ++h) {
        missing[h] = out.support[h] == 0;
        values[h] = missing[h] ? std::numeric_limits<double>::quiet_NaN() : sums[h] / out.support[h];
    }
    out.series = LoadSeries(s.consumer_id(), first_hour, Cadence::Hour, std::move(values), std::move(missing));
    return out;
}

inline LoadSeries resample_to_hourly(const LoadSeries& s) { return resample_to_hourly_with_support(s).series; }

/// One row per load timestamp with every future-known covariate attached.
struct AlignedTable {
    std::string consumer_id;
    Cadence cadence = Cadence::Hour;
    std::vector<Timestamp> timestamps;
    std::vector<double> target; // kW, NaN when missing
    std::vector<double> temperature;
    std::vector<double> humidity;
    std::vector<int> month;   // 1..12
    std::vector<int> weekday; // 0 = Monday
    std::vector<int> hour;    // local hour 0..23
    std::vector<int> holiday; // flag under the calendar's own policy
    std::vector<int> public_holiday;
    std::vector<int> weekend;
    std::optional<SocioEconomicRecord> socio;
    /// Named exogenous columns (baseline predictions, injected test features).
    std::map<std::string, std::vector<double>> extra;

    std::size_t size() const noexcept { return timestamps.size(); }

    bool routes_as_holiday(std::size_t row, HolidayDefinition def) const {
        return public_holiday[row] != 0 || (def == HolidayDefinition::PublicHolidaysAndWeekends && weekend[row] != 0);
    }

    /// Rows [first, first + count) as a new table.
    AlignedTable slice(std::size_t first, std::size_t count) const {
        first = std::min(first, size());
        count = std::min(count, size() - first);
        auto cut = [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            return V(v.begin() + static_cast<long>(first), v.begin() + static_cast<long>(first + count));
        };
        AlignedTable t;
        t.consumer_id = consumer_id;
        t.cadence = cadence;
        t.timestamps = cut(timestamps);
        t.target = cut(target);
        t.temperature = cut(temperature);
        t.humidity = cut(humidity);
        t.month = cut(month);
        t.weekday = cut(weekday);
        t.hour = cut(hour);
        t.holiday = cut(holiday);
        t.public_holiday = cut(public_holiday);
        t.weekend = cut(weekend);
        t.socio = socio;
        for (const auto& [name, col] : extra) t.extra.emplace(name, cut(col));
        return t;
    }
};

struct AlignOptions {
    Duration forward_fill_tolerance{3 * 3600};
};

/// Attaches weather (step-interpolated, forward-filled up to the tolerance),
/// local calendar fields, holiday flags and static socio-economic values.
/// Weather for a row never comes from later than the row's own hour.
inline AlignedTable align_covariates(const LoadSeries& load, const WeatherSeries& weather, const HolidayCalendar& cal,
                                     const std::optional<SocioEconomicRecord>& socio, const AlignOptions& opts = {}) {
    AlignedTable t;
    t.consumer_id = load.consumer_id();
    t.cadence = load.cadence();
    t.socio = socio;
    const std::size_t n = load.size();
    t.timestamps.reserve(n);
    t.target.reserve(n);
    t.temperature.resize(n);
    t.humidity.resize(n);
    t.month.resize(n);
    t.weekday.resize(n);
    t.hour.resize(n);
    t.holiday.resize(n);
    t.public_holiday.resize(n);
    t.weekend.resize(n);

    const long tol_hours = opts.forward_fill_tolerance.count() / 3600;
    auto gap_error = [&](Timestamp row_time, std::optional<std::size_t> last_ok) {
        std::string from = last_ok ? format_timestamp(weather.time_at(*last_ok)) : std::string("(no earlier data)");
        std::string to = "(no later data)";
        const auto probe = row_time < weather.start ? std::size_t{0}
                                                     : static_cast<std::size_t>((row_time - weather.start).count() / 3600);
        for (std::size_t j = probe; j < weather.size(); ++j)
            if (!std::isnan(weather.temperature_c[j]) && !std::isnan(weather.humidity_pct[j])) {
                to = format_timestamp(weather.time_at(j));
                break;
            }
        return Error(ErrorKind::Coverage, "weather zone '" + weather.zone_id + "' has no data within " +
                                              std::to_string(tol_hours) + " h before " + format_timestamp(row_time) +
                                              " (gap " + from + " .. " + to + ")");
    };

    for (std::size_t i = 0; i < n; ++i) {
        const Timestamp ts = load.time_at(i);
        t.timestamps.push_back(ts);
        t.target.push_back(load.is_missing(i) ? std::numeric_limits<double>::quiet_NaN() : load[i]);

        if (ts < weather.start) throw gap_error(ts, std::nullopt);
        const auto hour_idx = static_cast<long>((ts - weather.start).count() / 3600);
        std::optional<std::size_t> found;
        for (long j = std::min<long>(hour_idx, static_cast<long>(weather.size()) - 1); j >= 0 && j >= hour_idx - tol_hours;
             --j) {
            const auto ju = static_cast<std::size_t>(j);
            if (!std::isnan(weather.temperature_c[ju]) && !std::isnan(weather.humidity_pct[ju])) {
                found = ju;
                break;
            }
        }
        if (!found) {
            std::optional<std::size_t> last_ok;
            for (long j = std::min<long>(hour_idx, static_cast<long>(weather.size()) - 1); j >= 0; --j)
                if (!std::isnan(weather.temperature_c[static_cast<std::size_t>(j)])) {
                    last_ok = static_cast<std::size_t>(j);
                    break;
                }
            throw gap_error(ts, last_ok);
        }
        t.temperature[i] = weather.temperature_c[*found];
        t.humidity[i] = weather.humidity_pct[*found];

        const CivilTime c = cal.time_zone().civil(ts);
        t.month[i] = static_cast<int>(c.month);
        t.weekday[i] = static_cast<int>(c.weekday);
        t.hour[i] = c.hour;
        t.public_holiday[i] = cal.is_public_holiday(c.date) ? 1 : 0;
        t.weekend[i] = c.is_weekend() ? 1 : 0;
        t.holiday[i] = (t.public_holiday[i] || (cal.weekend_as_holiday() && t.weekend[i])) ? 1 : 0;
    }
    return t;
}

} // namespace loadfc
