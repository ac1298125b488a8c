#pragma once

#include "loadfc/error.hpp"
#include "loadfc/series.hpp"
#include "loadfc/time.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace loadfc {

/// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace csv {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(sep, pos);
        out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

inline std::optional<double> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline bool is_missing_token(std::string_view s) {
    return s.empty() || s == "nan" || s == "NaN" || s == "NA" || s == "null";
}

/// Reads all non-empty lines; the first is returned as the header.
struct Table {
    std::vector<std::string_view> header;
    std::vector<std::pair<std::size_t, std::vector<std::string_view>>> rows; // (1-based data row, fields)
    std::string storage;
};

inline Table read(std::istream& in, std::string_view expected_header, std::string_view what) {
    Table t;
    t.storage.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    std::string_view text = t.storage;
    std::size_t row = 0;
    bool have_header = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!have_header) {
            t.header = split(line);
            have_header = true;
            const auto expected = split(expected_header);
            if (t.header != expected)
                throw Error(ErrorKind::Parse, std::string(what) + ": expected header '" + std::string(expected_header) +
                                                  "', got '" + std::string(line) + "'");
            continue;
        }
        ++row;
        t.rows.emplace_back(row, split(line));
    }
    if (!have_header) throw Error(ErrorKind::Parse, std::string(what) + ": empty file");
    return t;
}

inline std::ifstream open(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    return in;
}

} // namespace csv

struct IngestOptions {
    std::string consumer_id;           // defaults to the file stem
    double max_missing_fraction = 0.2; // quality gate
};

inline LoadSeries read_load_csv(std::istream& in, Cadence cadence, const IngestOptions& opts = {}) {
    const auto table = csv::read(in, "timestamp,kw", "load csv");
    if (table.rows.empty()) throw Error(ErrorKind::Parse, "load csv: no data rows");
    const long step = cadence_duration(cadence).count();

    std::vector<std::pair<Timestamp, double>> points;
    points.reserve(table.rows.size());
    for (const auto& [row, fields] : table.rows) {
        const std::string where = "row " + std::to_string(row);
        if (fields.size() != 2) throw Error(ErrorKind::Parse, where + ": expected 2 fields");
        const auto ts = parse_timestamp(fields[0]);
        if (!ts) throw Error(ErrorKind::Parse, where + ": malformed timestamp '" + std::string(fields[0]) + "'");
        double value = std::numeric_limits<double>::quiet_NaN();
        if (!csv::is_missing_token(fields[1])) {
            const auto v = csv::parse_number(fields[1]);
            if (!v || !std::isfinite(*v)) throw Error(ErrorKind::Parse, where + ": malformed value '" + std::string(fields[1]) + "'");
            if (*v < 0.0) throw Error(ErrorKind::Parse, where + ": negative load '" + std::string(fields[1]) + "'");
            value = *v;
        }
        if (!points.empty()) {
            if (*ts == points.back().first)
                throw Error(ErrorKind::Ordering, where + ": duplicate timestamp " + format_timestamp(*ts));
            if (*ts < points.back().first)
                throw Error(ErrorKind::Ordering, where + ": timestamp " + format_timestamp(*ts) + " precedes previous row");
            if ((*ts - points.front().first).count() % step != 0)
                throw Error(ErrorKind::Parse, where + ": timestamp " + format_timestamp(*ts) + " is off the " +
                                                  std::string(to_string(cadence)) + " grid");
        }
        points.emplace_back(*ts, value);
    }

    const Timestamp start = points.front().first;
    const auto n = static_cast<std::size_t>((points.back().first - start).count() / step) + 1;
    std::vector<double> values(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<bool> missing(n, true);
    for (const auto& [t, v] : points) {
        const auto i = static_cast<std::size_t>((t - start).count() / step);
        values[i] = v;
        missing[i] = std::isnan(v);
    }
    LoadSeries series(opts.consumer_id, start, cadence, std::move(values), std::move(missing));
    const double frac = static_cast<double>(series.missing_count()) / static_cast<double>(series.size());
    if (frac > opts.max_missing_fraction)
        throw Error(ErrorKind::Quality, "load csv: " + std::to_string(series.missing_count()) + " of " +
                                            std::to_string(series.size()) + " samples missing exceeds the " +
                                            format_double(opts.max_missing_fraction * 100.0) + "% limit");
    return series;
}

inline LoadSeries ingest_load_csv(const std::filesystem::path& path, Cadence cadence, IngestOptions opts = {}) {
    if (opts.consumer_id.empty()) opts.consumer_id = path.stem().string();
    auto in = csv::open(path);
    try {
        return read_load_csv(in, cadence, opts);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

/// Writes the grid back out; missing samples become empty value fields.
inline void write_load_csv(std::ostream& out, const LoadSeries& s) {
    out << "timestamp,kw\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out << format_timestamp(s.time_at(i)) << ',';
        if (!s.is_missing(i)) out << format_double(s[i]);
        out << '\n';
    }
}

inline WeatherSeries read_weather_csv(std::istream& in, std::string zone_id) {
    const auto table = csv::read(in, "timestamp,temp_c,humidity_pct", "weather csv");
    if (table.rows.empty()) throw Error(ErrorKind::Parse, "weather csv: no data rows");
    WeatherSeries w;
    w.zone_id = std::move(zone_id);
    std::optional<Timestamp> prev;
    for (const auto& [row, fields] : table.rows) {
        const std::string where = "weather csv row " + std::to_string(row);
        if (fields.size() != 3) throw Error(ErrorKind::Parse, where + ": expected 3 fields");
        const auto ts = parse_timestamp(fields[0]);
        if (!ts) throw Error(ErrorKind::Parse, where + ": malformed timestamp '" + std::string(fields[0]) + "'");
        auto field = [&](std::string_view f) {
            if (csv::is_missing_token(f)) return std::numeric_limits<double>::quiet_NaN();
            const auto v = csv::parse_number(f);
            if (!v) throw Error(ErrorKind::Parse, where + ": malformed value '" + std::string(f) + "'");
            return *v;
        };
        const double temp = field(fields[1]);
        const double hum = field(fields[2]);
        if (!prev) {
            w.start = *ts;
        } else {
            if (*ts <= *prev) throw Error(ErrorKind::Ordering, where + ": timestamps must strictly increase");
            if ((*ts - w.start).count() % 3600 != 0) throw Error(ErrorKind::Parse, where + ": weather must be hourly");
        }
        const auto i = static_cast<std::size_t>((*ts - w.start).count() / 3600);
        w.temperature_c.resize(i + 1, std::numeric_limits<double>::quiet_NaN());
        w.humidity_pct.resize(i + 1, std::numeric_limits<double>::quiet_NaN());
        w.temperature_c[i] = temp;
        w.humidity_pct[i] = hum;
        prev = ts;
    }
    w.validate();
    return w;
}

inline WeatherSeries read_weather_csv(const std::filesystem::path& path, std::string zone_id = {}) {
    if (zone_id.empty()) zone_id = path.stem().string();
    auto in = csv::open(path);
    return read_weather_csv(in, std::move(zone_id));
}

inline void write_weather_csv(std::ostream& out, const WeatherSeries& w) {
    out << "timestamp,temp_c,humidity_pct\n";
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (std::isnan(w.temperature_c[i]) && std::isnan(w.humidity_pct[i])) continue;
        out << format_timestamp(w.time_at(i)) << ',';
        if (!std::isnan(w.temperature_c[i])) out << format_double(w.temperature_c[i]);
        out << ',';
        if (!std::isnan(w.humidity_pct[i])) out << format_double(w.humidity_pct[i]);
        out << '\n';
    }
}

/// One `YYYY-MM-DD` per line; `#` starts a comment.
inline std::vector<std::chrono::year_month_day> read_holiday_dates(std::istream& in) {
    std::vector<std::chrono::year_month_day> dates;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto fields = csv::split(line);
        const std::string_view text = fields.empty() ? std::string_view{} : fields.front();
        if (text.empty()) continue;
        const auto d = parse_date(text);
        if (!d) throw Error(ErrorKind::Parse, "holiday file line " + std::to_string(lineno) + ": malformed date '" +
                                                  std::string(text) + "'");
        dates.push_back(*d);
    }
    return dates;
}

inline HolidayCalendar read_holiday_calendar(const std::filesystem::path& path, const TimeZone& tz,
                                             bool weekend_as_holiday = false) {
    auto in = csv::open(path);
    return HolidayCalendar(read_holiday_dates(in), path.stem().string(), weekend_as_holiday, tz);
}

inline void write_holidays(std::ostream& out, const HolidayCalendar& cal) {
    out << "# public holidays (" << (cal.region().empty() ? "unspecified region" : cal.region()) << ")\n";
    for (const auto& d : cal.dates()) out << format_date(d) << '\n';
}

inline std::map<std::string, SocioEconomicRecord> read_socio_csv(std::istream& in) {
    const auto table = csv::read(in, "zone_id,population,density,tsi,gdhi", "socio-economic csv");
    std::map<std::string, SocioEconomicRecord> out;
    for (const auto& [row, fields] : table.rows) {
        const std::string where = "socio-economic csv row " + std::to_string(row);
        if (fields.size() != 5) throw Error(ErrorKind::Parse, where + ": expected 5 fields");
        SocioEconomicRecord r;
        r.zone_id = std::string(fields[0]);
        double* targets[] = {&r.total_population, &r.population_density, &r.tsi, &r.gdhi};
        for (std::size_t k = 0; k < 4; ++k) {
            const auto v = csv::parse_number(fields[k + 1]);
            if (!v) throw Error(ErrorKind::Parse, where + ": malformed value '" + std::string(fields[k + 1]) + "'");
            *targets[k] = *v;
        }
        r.validate();
        if (!out.emplace(r.zone_id, r).second) throw Error(ErrorKind::Data, where + ": duplicate zone '" + r.zone_id + "'");
    }
    return out;
}

inline std::map<std::string, SocioEconomicRecord> read_socio_csv(const std::filesystem::path& path) {
    auto in = csv::open(path);
    return read_socio_csv(in);
}

inline void write_socio_csv(std::ostream& out, const std::vector<SocioEconomicRecord>& records) {
    out << "zone_id,population,density,tsi,gdhi\n";
    for (const auto& r : records)
        out << r.zone_id << ',' << format_double(r.total_population) << ',' << format_double(r.population_density) << ','
            << format_double(r.tsi) << ',' << format_double(r.gdhi) << '\n';
}

} // namespace loadfc
