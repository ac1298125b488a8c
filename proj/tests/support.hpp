#pragma once

// Small helpers shared by the unit tests.

#include "loadfc/align.hpp"
#include "loadfc/series.hpp"

#include <functional>
#include <string>

namespace testing_support {

using namespace loadfc;

inline Timestamp ts(const char* s) { return *parse_timestamp(s); }

inline const TimeZone& madrid() {
    static const TimeZone tz = TimeZone::from_name("Europe/Madrid");
    return tz;
}

/// Series whose value at each step is f(utc instant, Madrid civil time).
inline LoadSeries make_series(const std::string& id, Timestamp start, Cadence cadence, std::size_t n,
                              const std::function<double(Timestamp, const CivilTime&)>& f) {
    std::vector<double> v(n);
    const auto step = cadence_duration(cadence);
    for (std::size_t i = 0; i < n; ++i) {
        const Timestamp t = start + step * static_cast<long>(i);
        v[i] = f(t, madrid().civil(t));
    }
    return LoadSeries(id, start, cadence, std::move(v));
}

inline WeatherSeries make_weather(const std::string& zone, Timestamp start, std::size_t hours,
                                  const std::function<double(std::size_t)>& temp = {}) {
    WeatherSeries w;
    w.zone_id = zone;
    w.start = start;
    for (std::size_t i = 0; i < hours; ++i) {
        w.temperature_c.push_back(temp ? temp(i) : 15.0 + 8.0 * std::sin(static_cast<double>(i) * 0.2618));
        w.humidity_pct.push_back(60.0 + 20.0 * std::cos(static_cast<double>(i) * 0.1));
    }
    return w;
}

} // namespace testing_support
