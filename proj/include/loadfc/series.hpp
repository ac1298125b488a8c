#pragma once

#include "loadfc/error.hpp"
#include "loadfc/time.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace loadfc {

enum class Cadence { QuarterHour, Hour };

inline Duration cadence_duration(Cadence c) {
    return c == Cadence::QuarterHour ? Duration{900} : Duration{3600};
}

inline std::size_t steps_per_day(Cadence c) { return c == Cadence::QuarterHour ? 96 : 24; }

inline std::string_view to_string(Cadence c) { return c == Cadence::QuarterHour ? "15min" : "60min"; }

inline Cadence cadence_from_minutes(long minutes) {
    if (minutes == 15) return Cadence::QuarterHour;
    if (minutes == 60) return Cadence::Hour;
    throw Error(ErrorKind::Config, "cadence must be 15 or 60 minutes, got " + std::to_string(minutes));
}

/// Uniformly sampled consumption readings in kW. Index i maps to
/// start + i * cadence; missing samples carry NaN and a set mask bit.
class LoadSeries {
public:
    LoadSeries() = default;

    LoadSeries(std::string consumer_id, Timestamp start, Cadence cadence, std::vector<double> values,
               std::vector<bool> missing = {})
        : consumer_id_(std::move(consumer_id)), start_(start), cadence_(cadence), values_(std::move(values)),
          missing_(std::move(missing)) {
        if (missing_.empty()) missing_.assign(values_.size(), false);
        if (missing_.size() != values_.size())
            throw Error(ErrorKind::Data, "missing-mask length differs from value count");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) missing_[i] = true;
            if (missing_[i]) {
                values_[i] = std::numeric_limits<double>::quiet_NaN();
            } else if (values_[i] < 0.0) {
                throw Error(ErrorKind::Data, "negative load " + std::to_string(values_[i]) + " kW at index " +
                                                 std::to_string(i));
            }
        }
    }

    const std::string& consumer_id() const noexcept { return consumer_id_; }
    Timestamp start() const noexcept { return start_; }
    Cadence cadence() const noexcept { return cadence_; }
    Duration step() const noexcept { return cadence_duration(cadence_); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<bool>& missing() const noexcept { return missing_; }
    bool is_missing(std::size_t i) const { return missing_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    Timestamp time_at(std::size_t i) const { return start_ + step() * static_cast<long>(i); }
    Timestamp end() const { return time_at(values_.size()); }

    std::size_t missing_count() const {
        return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), true));
    }

    /// Index of timestamp `t` on this grid, if it lies on the grid and in range.
    std::optional<std::size_t> index_of(Timestamp t) const {
        if (t < start_) return std::nullopt;
        const auto offset = (t - start_).count();
        const auto step_s = step().count();
        if (offset % step_s != 0) return std::nullopt;
        const auto i = static_cast<std::size_t>(offset / step_s);
        if (i >= values_.size()) return std::nullopt;
        return i;
    }

    /// Contiguous sub-range [first, first + count).
    LoadSeries slice(std::size_t first, std::size_t count) const {
        first = std::min(first, values_.size());
        count = std::min(count, values_.size() - first);
        return LoadSeries(consumer_id_, time_at(first),
                          cadence_,
                          std::vector<double>(values_.begin() + static_cast<long>(first),
                                              values_.begin() + static_cast<long>(first + count)),
                          std::vector<bool>(missing_.begin() + static_cast<long>(first),
                                            missing_.begin() + static_cast<long>(first + count)));
    }

    LoadSeries scaled(double k) const {
        std::vector<double> v = values_;
        for (auto& x : v) x *= k;
        return LoadSeries(consumer_id_, start_, cadence_, std::move(v), missing_);
    }

private:
    std::string consumer_id_;
    Timestamp start_{};
    Cadence cadence_ = Cadence::Hour;
    std::vector<double> values_;
    std::vector<bool> missing_;
};

/// Hourly dry-bulb temperature and relative humidity for one climate zone.
struct WeatherSeries {
    std::string zone_id;
    Timestamp start{};
    std::vector<double> temperature_c;
    std::vector<double> humidity_pct;

    std::size_t size() const noexcept { return temperature_c.size(); }
    Timestamp time_at(std::size_t i) const { return start + Duration{3600} * static_cast<long>(i); }
    Timestamp end() const { return time_at(size()); }

    void validate() const {
        if (temperature_c.size() != humidity_pct.size())
            throw Error(ErrorKind::Data, "weather '" + zone_id + "': temperature/humidity length mismatch");
        for (std::size_t i = 0; i < humidity_pct.size(); ++i) {
            const double h = humidity_pct[i];
            if (std::isfinite(h) && (h < 0.0 || h > 100.0))
                throw Error(ErrorKind::Data, "weather '" + zone_id + "': humidity " + std::to_string(h) +
                                                 " outside [0,100] at " + format_timestamp(time_at(i)));
        }
    }
};

enum class HolidayDefinition { PublicHolidays, PublicHolidaysAndWeekends };

inline std::string_view to_string(HolidayDefinition d) {
    return d == HolidayDefinition::PublicHolidays ? "ph" : "ph+we";
}

inline HolidayDefinition holiday_definition_from_string(std::string_view s) {
    if (s == "ph") return HolidayDefinition::PublicHolidays;
    if (s == "ph+we") return HolidayDefinition::PublicHolidaysAndWeekends;
    throw Error(ErrorKind::Config, "holiday_def must be 'ph' or 'ph+we', got '" + std::string(s) + "'");
}

/// Public-holiday civil dates plus the time zone in which civil dates are
/// evaluated. Coverage spans whole calendar years from the first to the last
/// listed holiday unless set explicitly.
class HolidayCalendar {
public:
    HolidayCalendar() : HolidayCalendar(std::vector<std::chrono::year_month_day>{}) {}

    HolidayCalendar(std::vector<std::chrono::year_month_day> dates, std::string region = {},
                    bool weekend_as_holiday = false, TimeZone tz = TimeZone::from_name("Europe/Madrid"))
        : region_(std::move(region)), weekend_as_holiday_(weekend_as_holiday), tz_(std::move(tz)) {
        for (const auto& d : dates) {
            if (!d.ok()) throw Error(ErrorKind::Data, "invalid holiday date");
            dates_.insert(std::chrono::sys_days{d});
        }
        if (!dates_.empty()) {
            using namespace std::chrono;
            const year first = year_month_day{*dates_.begin()}.year();
            const year last_year = year_month_day{*dates_.rbegin()}.year();
            coverage_ = {sys_days{first / January / 1}, sys_days{last_year / December / 31}};
        }
    }

    void set_coverage(std::chrono::year_month_day first, std::chrono::year_month_day last) {
        coverage_ = {std::chrono::sys_days{first}, std::chrono::sys_days{last}};
    }

    const std::string& region() const noexcept { return region_; }
    bool weekend_as_holiday() const noexcept { return weekend_as_holiday_; }
    const TimeZone& time_zone() const noexcept { return tz_; }
    std::size_t size() const noexcept { return dates_.size(); }

    std::vector<std::chrono::year_month_day> dates() const {
        return {dates_.begin(), dates_.end()};
    }

    bool is_public_holiday(std::chrono::year_month_day d) const { return dates_.count(std::chrono::sys_days{d}) > 0; }

    bool covers(std::chrono::year_month_day d) const {
        if (!coverage_) return false;
        const std::chrono::sys_days day{d};
        return day >= coverage_->first && day <= coverage_->second;
    }

    /// Holiday flag of instant `t` under the calendar's own policy flag.
    bool is_holiday(Timestamp t) const {
        return is_holiday(t, weekend_as_holiday_ ? HolidayDefinition::PublicHolidaysAndWeekends
                                                 : HolidayDefinition::PublicHolidays);
    }

    bool is_holiday(Timestamp t, HolidayDefinition def) const {
        const CivilTime c = tz_.civil(t);
        if (is_public_holiday(c.date)) return true;
        return def == HolidayDefinition::PublicHolidaysAndWeekends && c.is_weekend();
    }

private:
    std::set<std::chrono::sys_days> dates_;
    std::string region_;
    bool weekend_as_holiday_ = false;
    TimeZone tz_ = TimeZone::utc();
    std::optional<std::pair<std::chrono::sys_days, std::chrono::sys_days>> coverage_;
};

struct SocioEconomicRecord {
    std::string zone_id;
    double total_population = 0.0;
    double population_density = 0.0;
    double tsi = 0.0;
    double gdhi = 0.0;

    void validate() const {
        if (!(total_population > 0.0) || !(population_density > 0.0))
            throw Error(ErrorKind::Data, "socio-economic record '" + zone_id + "': population and density must be > 0");
    }
};

enum class ConsumerType { Industrial, Commercial, Residential };

inline std::string_view to_string(ConsumerType t) {
    switch (t) {
    case ConsumerType::Industrial: return "industrial";
    case ConsumerType::Commercial: return "commercial";
    case ConsumerType::Residential: return "residential";
    }
    return "unknown";
}

inline ConsumerType consumer_type_from_string(std::string_view s) {
    if (s == "industrial") return ConsumerType::Industrial;
    if (s == "commercial") return ConsumerType::Commercial;
    if (s == "residential") return ConsumerType::Residential;
    throw Error(ErrorKind::Parse, "unknown consumer type '" + std::string(s) + "'");
}

inline constexpr std::size_t index_of(ConsumerType t) { return static_cast<std::size_t>(t); }

struct ConsumerRecord {
    std::string consumer_id;
    std::string zone_id;
    std::optional<ConsumerType> declared_type;
    LoadSeries load;
};

} // namespace loadfc
