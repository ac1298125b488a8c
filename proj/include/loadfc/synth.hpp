#pragma once

#include "loadfc/io.hpp"
#include "loadfc/parallel.hpp"
#include "loadfc/rng.hpp"
#include "loadfc/series.hpp"
#include "loadfc/time.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace loadfc {

// 2021-01-01 00:00 in Madrid
inline constexpr Timestamp kSynthStart{std::chrono::sys_days{std::chrono::year{2020} / 12 / 31}.time_since_epoch() +
                                       std::chrono::hours{23}};

struct SynthConfig {
    std::string consumer_id = "c0";
    std::string zone_id = "zone_a";
    ConsumerType type = ConsumerType::Industrial;
    Timestamp start = kSynthStart;
    std::size_t weeks = 52;
    Cadence cadence = Cadence::QuarterHour;
    double base_kw = 100.0;
    double weekday_level = 1.0;
    double saturday_level = 1.0;
    double sunday_level = 1.0;
    double holiday_level = 1.0;
    bool flat_off_days = false;       // off days (level < 1) run a flat minimum instead of the shape
    std::array<double, 24> shape{};   // relative level per local hour
    double jitter_hours = 0.0;        // sd of the daily peak shift
    double temp_sensitivity = 0.0;    // kW per degree outside the comfort band
    double comfort_lo = 18.0;
    double comfort_hi = 24.0;
    double noise = 0.05;              // sd of the log-noise
    double noise_ar = 0.8;            // AR(1) coefficient of the log-noise per hour
    double day_level_sd = 0.0;        // sd of the persistent daily activity level (log scale)
    double day_level_ar = 0.9;        // its AR(1) coefficient from one day to the next
    double spike_probability = 0.0;   // per hour
    double spike_kw = 0.0;            // mean spike height
    std::uint64_t seed = 1;

    void validate() const {
        auto bad = [&](const std::string& what) { throw Error(ErrorKind::Config, "synth '" + consumer_id + "': " + what); };
        if (weeks < 4) bad("span must be at least 4 weeks, got " + std::to_string(weeks));
        for (double r : {weekday_level, saturday_level, sunday_level, holiday_level})
            if (!(r >= 0.0)) bad("level ratios must be >= 0");
        for (double w : shape)
            if (!(w >= 0.0)) bad("shape weights must be >= 0");
        if (!(base_kw >= 0.0) || !(noise >= 0.0) || !(jitter_hours >= 0.0) || !(spike_kw >= 0.0)) bad("negative scale");
        if (!(noise_ar >= 0.0 && noise_ar < 1.0)) bad("noise_ar must be in [0, 1)");
        if (!(day_level_sd >= 0.0) || !(day_level_ar >= 0.0 && day_level_ar < 1.0)) bad("bad daily level process");
        if (!(spike_probability >= 0.0 && spike_probability <= 1.0)) bad("spike_probability must be in [0, 1]");
    }

    /// Per-type defaults: industrial shuts down at weekends and holidays,
    /// commercial opens Monday to Saturday and reacts to heat, residential
    /// peaks morning and evening with irregular timing.
    static SynthConfig defaults(ConsumerType type) {
        SynthConfig c;
        c.type = type;
        switch (type) {
        case ConsumerType::Industrial:
            c.base_kw = 100.0;
            c.saturday_level = c.sunday_level = c.holiday_level = 0.05;
            c.flat_off_days = true;
            for (int h = 0; h < 24; ++h) c.shape[h] = (h >= 6 && h < 22) ? 1.0 : 0.35;
            c.noise = 0.05;
            break;
        case ConsumerType::Commercial:
            c.base_kw = 60.0;
            c.saturday_level = 0.8;
            c.sunday_level = 0.3;
            c.holiday_level = 0.3;
            for (int h = 0; h < 24; ++h) c.shape[h] = (h >= 9 && h < 21) ? 1.0 : 0.25;
            c.temp_sensitivity = 1.5;
            c.noise = 0.06;
            break;
        case ConsumerType::Residential:
            c.base_kw = 3.0;
            c.saturday_level = c.sunday_level = c.holiday_level = 1.15;
            c.shape = {0.45, 0.4, 0.38, 0.36, 0.36, 0.4, 0.6, 0.95, 1.0, 0.7, 0.55, 0.55,
                       0.65, 0.7, 0.6, 0.55, 0.6, 0.75, 1.0, 1.3, 1.4, 1.25, 0.9, 0.6};
            c.jitter_hours = 1.0;
            c.temp_sensitivity = 0.04;
            c.noise = 0.15;
            c.day_level_sd = 0.2;
            c.spike_probability = 0.03;
            c.spike_kw = 2.0;
            break;
        }
        return c;
    }
};

namespace detail {

// shape value at a fractional local hour, linear between hourly weights, wrapping at midnight
inline double shape_at(const std::array<double, 24>& s, double hour) {
    hour = std::fmod(hour, 24.0);
    if (hour < 0) hour += 24.0;
    const auto h0 = static_cast<std::size_t>(hour) % 24;
    const double f = hour - std::floor(hour);
    return s[h0] * (1.0 - f) + s[(h0 + 1) % 24] * f;
}

} // namespace detail

/// Seeded load series for one consumer, labelled with the configured type.
inline ConsumerRecord generate(const SynthConfig& cfg, const HolidayCalendar& cal, const WeatherSeries& weather) {
    cfg.validate();
    const Duration step = cadence_duration(cfg.cadence);
    const std::size_t n = cfg.weeks * 7 * steps_per_day(cfg.cadence);
    const Timestamp end = cfg.start + step * static_cast<long>(n);
    if (weather.size() == 0 || cfg.start < weather.start || end > weather.end())
        throw Error(ErrorKind::Coverage, "weather zone '" + weather.zone_id + "' does not cover " +
                                             format_timestamp(cfg.start) + " .. " + format_timestamp(end));

    Rng day_rng(derive_seed(cfg.seed, "days"));
    Rng noise_rng(derive_seed(cfg.seed, "noise"));
    Rng spike_rng(derive_seed(cfg.seed, "spikes"));
    const double hours_per_step = static_cast<double>(step.count()) / 3600.0;
    const double phi = std::pow(cfg.noise_ar, hours_per_step);
    const double innovation = cfg.noise * std::sqrt(1.0 - phi * phi);

    std::vector<double> values(n);
    double e = cfg.noise * noise_rng.normal();
    std::optional<std::chrono::year_month_day> day;
    double shift_am = 0.0, shift_pm = 0.0;
    double day_level = cfg.day_level_sd * day_rng.normal();
    double spike_left = 0.0, spike_height = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Timestamp t = cfg.start + step * static_cast<long>(i);
        const CivilTime c = cal.time_zone().civil(t);
        if (!day || *day != c.date) {
            day = c.date;
            shift_am = cfg.jitter_hours > 0 ? day_rng.normal(0.0, cfg.jitter_hours) : 0.0;
            shift_pm = cfg.jitter_hours > 0 ? day_rng.normal(0.0, cfg.jitter_hours) : 0.0;
            if (cfg.day_level_sd > 0)
                day_level = cfg.day_level_ar * day_level +
                            cfg.day_level_sd * std::sqrt(1.0 - cfg.day_level_ar * cfg.day_level_ar) * day_rng.normal();
        }
        double level = cfg.weekday_level;
        if (cal.is_public_holiday(c.date)) level = cfg.holiday_level;
        else if (c.weekday == 5) level = cfg.saturday_level;
        else if (c.weekday == 6) level = cfg.sunday_level;

        const double hour = c.hour + c.minute / 60.0;
        double clean;
        if (cfg.flat_off_days && level < cfg.weekday_level) {
            clean = cfg.base_kw * level;
        } else {
            const double shifted = hour - (hour < 14.0 ? shift_am : shift_pm);
            clean = cfg.base_kw * level * detail::shape_at(cfg.shape, shifted);
        }

        const auto widx = static_cast<std::size_t>((t - weather.start).count() / 3600);
        const double temp = weather.temperature_c[widx];
        if (cfg.temp_sensitivity > 0.0 && std::isfinite(temp)) {
            const double excess = std::max(0.0, temp - cfg.comfort_hi) + 0.5 * std::max(0.0, cfg.comfort_lo - temp);
            // cooling only runs while the premises are in use
            const double use = cfg.type == ConsumerType::Commercial ? level * detail::shape_at(cfg.shape, hour) : 1.0;
            clean += cfg.temp_sensitivity * excess * use;
        }

        if (i > 0) e = phi * e + innovation * noise_rng.normal();
        double v = clean * std::exp(e - 0.5 * cfg.noise * cfg.noise + day_level);

        if (cfg.spike_probability > 0.0) {
            if (spike_left <= 0.0 && spike_rng.uniform() < cfg.spike_probability * hours_per_step) {
                spike_left = 1.0;
                spike_height = cfg.spike_kw * spike_rng.uniform(0.5, 1.5);
            }
            if (spike_left > 0.0) {
                v += spike_height;
                spike_left -= hours_per_step;
            }
        }
        values[i] = std::max(0.0, v);
    }
    return {cfg.consumer_id, cfg.zone_id, cfg.type, LoadSeries(cfg.consumer_id, cfg.start, cfg.cadence, std::move(values))};
}

/// Gregorian Easter Sunday (anonymous Gregorian algorithm).
inline std::chrono::year_month_day easter_sunday(int y) {
    const int a = y % 19, b = y / 100, c = y % 100, d = b / 4, e = b % 4;
    const int f = (b + 8) / 25, g = (b - f + 1) / 3, h = (19 * a + b - d - g + 15) % 30;
    const int i = c / 4, k = c % 4, l = (32 + 2 * e + 2 * i - h - k) % 7;
    const int m = (a + 11 * h + 22 * l) / 451;
    const int month = (h + l - 7 * m + 114) / 31, dom = (h + l - 7 * m + 114) % 31 + 1;
    return std::chrono::year{y} / static_cast<unsigned>(month) / static_cast<unsigned>(dom);
}

/// National public holidays of Spain for the given years, Good Friday included.
inline HolidayCalendar spanish_holidays(int first_year, int last_year, bool weekend_as_holiday = false) {
    using namespace std::chrono;
    std::vector<year_month_day> dates;
    for (int y = first_year; y <= last_year; ++y) {
        const year yy{y};
        for (auto md : {January / 1, January / 6, May / 1, August / 15, October / 12, November / 1, December / 6,
                        December / 8, December / 25})
            dates.push_back(yy / md);
        dates.push_back(year_month_day{sys_days{easter_sunday(y)} - days{2}});
    }
    HolidayCalendar cal(dates, "ES", weekend_as_holiday);
    cal.set_coverage(year{first_year} / January / 1, year{last_year} / December / 31);
    return cal;
}

/// Hourly weather: annual and diurnal sinusoids plus AR(1) noise.
inline WeatherSeries synth_weather(const std::string& zone, Timestamp start, std::size_t hours, std::uint64_t seed,
                                   double mean_c = 16.0) {
    Rng rng(derive_seed(seed, "weather/" + zone));
    WeatherSeries w;
    w.zone_id = zone;
    w.start = start;
    double e = 0.0;
    for (std::size_t i = 0; i < hours; ++i) {
        const Timestamp t = w.time_at(i);
        const double day_of_year = static_cast<double>((t.time_since_epoch().count() / 86400) % 365);
        const double hour = static_cast<double>((t.time_since_epoch().count() / 3600) % 24);
        const double annual = -9.0 * std::cos(2.0 * std::numbers::pi * (day_of_year - 20.0) / 365.0);
        const double diurnal = -5.0 * std::cos(2.0 * std::numbers::pi * (hour - 3.0) / 24.0);
        e = 0.9 * e + 0.6 * rng.normal();
        const double temp = mean_c + annual + diurnal + e;
        w.temperature_c.push_back(std::round(temp * 100.0) / 100.0);
        const double hum = std::clamp(62.0 - 1.5 * (temp - mean_c) + 4.0 * rng.normal(), 5.0, 100.0);
        w.humidity_pct.push_back(std::round(hum * 100.0) / 100.0);
    }
    return w;
}

struct FleetConfig {
    std::size_t industrial = 30;
    std::size_t commercial = 30;
    std::size_t residential = 6;
    std::size_t weeks = 52;
    Cadence cadence = Cadence::QuarterHour;
    Timestamp start = kSynthStart;
    std::vector<std::string> zones = {"zone_a", "zone_b", "zone_c"};
    std::size_t consumers_per_location = 3;
    std::uint64_t seed = 42;
    std::size_t jobs = 1;
};

struct Fleet {
    std::vector<ConsumerRecord> records;
    std::map<std::string, std::string> location; // consumer -> location
    std::map<std::string, WeatherSeries> weather;
    std::vector<SocioEconomicRecord> socio;
    HolidayCalendar calendar;
};

/// Consumers named ind_NN, com_NN, res_NN; per-consumer seeds derive from the
/// master seed and the consumer id, so output does not depend on `jobs`.
inline Fleet generate_fleet(const FleetConfig& fc) {
    if (fc.industrial + fc.commercial + fc.residential == 0) throw Error(ErrorKind::Config, "fleet has no consumers");
    if (fc.zones.empty()) throw Error(ErrorKind::Config, "fleet needs at least one zone");
    if (fc.consumers_per_location == 0) throw Error(ErrorKind::Config, "consumers_per_location must be >= 1");
    if (fc.weeks < 4) throw Error(ErrorKind::Config, "span must be at least 4 weeks, got " + std::to_string(fc.weeks));
    Fleet f;
    // weather runs a week past the load so forecasts can be issued at the end of the data
    const std::size_t hours = fc.weeks * 7 * 24 + 7 * 24;
    const auto tz = TimeZone::from_name("Europe/Madrid");
    const int y0 = static_cast<int>(tz.civil(fc.start).date.year());
    const int y1 = static_cast<int>(tz.civil(fc.start + Duration{3600} * static_cast<long>(hours)).date.year());
    f.calendar = spanish_holidays(y0, y1);
    for (std::size_t z = 0; z < fc.zones.size(); ++z) {
        f.weather.emplace(fc.zones[z], synth_weather(fc.zones[z], fc.start, hours, fc.seed, 14.0 + 2.0 * z));
        Rng rng(derive_seed(fc.seed, "socio/" + fc.zones[z]));
        f.socio.push_back({fc.zones[z], std::round(rng.uniform(5e3, 2e5)), std::round(rng.uniform(50, 5000)),
                           std::round(rng.uniform(80, 120) * 10) / 10, std::round(rng.uniform(1e4, 2.5e4))});
    }

    std::vector<SynthConfig> configs;
    auto add = [&](ConsumerType type, std::size_t count, const char* prefix) {
        for (std::size_t k = 0; k < count; ++k) {
            auto c = SynthConfig::defaults(type);
            char id[32];
            std::snprintf(id, sizeof id, "%s_%02zu", prefix, k + 1);
            c.consumer_id = id;
            c.zone_id = fc.zones[configs.size() % fc.zones.size()];
            c.start = fc.start;
            c.weeks = fc.weeks;
            c.cadence = fc.cadence;
            c.seed = derive_seed(fc.seed, c.consumer_id);
            // per-consumer scale so the fleet is not made of identical twins
            Rng rng(derive_seed(c.seed, "scale"));
            c.base_kw *= rng.uniform(0.6, 1.6);
            c.temp_sensitivity *= rng.uniform(0.6, 1.4);
            configs.push_back(c);
        }
    };
    add(ConsumerType::Industrial, fc.industrial, "ind");
    add(ConsumerType::Commercial, fc.commercial, "com");
    add(ConsumerType::Residential, fc.residential, "res");

    f.records.resize(configs.size());
    parallel_for(configs.size(), fc.jobs, [&](std::size_t i) {
        f.records[i] = generate(configs[i], f.calendar, f.weather.at(configs[i].zone_id));
    });
    for (std::size_t i = 0; i < configs.size(); ++i) {
        char loc[32];
        std::snprintf(loc, sizeof loc, "loc_%02zu", i / fc.consumers_per_location + 1);
        f.location[configs[i].consumer_id] = loc;
    }
    return f;
}

/// Corpus layout: labels.csv, consumers.csv, load/<id>.csv, weather/<zone>.csv,
/// holidays.txt, socio.csv.
inline void write_fleet(const Fleet& f, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "load");
    fs::create_directories(dir / "weather");
    auto open = [](const fs::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
        return out;
    };
    {
        auto labels = open(dir / "labels.csv");
        auto consumers = open(dir / "consumers.csv");
        labels << "consumer_id,type\n";
        consumers << "consumer_id,zone_id,location,cadence_min\n";
        for (const auto& r : f.records) {
            labels << r.consumer_id << ',' << to_string(*r.declared_type) << '\n';
            consumers << r.consumer_id << ',' << r.zone_id << ',' << f.location.at(r.consumer_id) << ','
                      << r.load.step().count() / 60 << '\n';
        }
    }
    for (const auto& r : f.records) {
        auto out = open(dir / "load" / (r.consumer_id + ".csv"));
        write_load_csv(out, r.load);
    }
    for (const auto& [zone, w] : f.weather) {
        auto out = open(dir / "weather" / (zone + ".csv"));
        write_weather_csv(out, w);
    }
    {
        auto out = open(dir / "holidays.txt");
        write_holidays(out, f.calendar);
    }
    {
        auto out = open(dir / "socio.csv");
        write_socio_csv(out, f.socio);
    }
}

} // namespace loadfc
