#pragma once

#include "loadfc/align.hpp"
#include "loadfc/error.hpp"
#include "loadfc/series.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace loadfc {

enum class Task { DayAhead, QuarterHour };

inline std::string_view to_string(Task t) { return t == Task::DayAhead ? "day-ahead" : "15-min"; }

inline Task task_from_string(std::string_view s) {
    if (s == "day-ahead") return Task::DayAhead;
    if (s == "15-min") return Task::QuarterHour;
    throw Error(ErrorKind::Config, "task must be 'day-ahead' or '15-min', got '" + std::string(s) + "'");
}

inline Cadence task_cadence(Task t) { return t == Task::DayAhead ? Cadence::Hour : Cadence::QuarterHour; }

/// Forecast horizon in steps of the task's cadence.
inline std::size_t task_horizon(Task t) { return t == Task::DayAhead ? 24 : 1; }

inline std::vector<std::size_t> default_lags(Task t) {
    if (t == Task::DayAhead) return {24, 25, 48, 168};
    return {1, 2, 3, 4, 96, 672};
}

enum class FeatureKind {
    Month,
    Weekday,
    Hour,
    Holiday,
    Temperature,
    Humidity,
    SocioStatic,
    TargetLag,
    BaselineCovariate,
    Exogenous,
};

enum class Encoding { Categorical, OneHot, Standardized, Raw };

inline std::string_view to_string(FeatureKind k) {
    switch (k) {
    case FeatureKind::Month: return "calendar-month";
    case FeatureKind::Weekday: return "calendar-weekday";
    case FeatureKind::Hour: return "calendar-hour";
    case FeatureKind::Holiday: return "holiday-flag";
    case FeatureKind::Temperature: return "weather-temp";
    case FeatureKind::Humidity: return "weather-humidity";
    case FeatureKind::SocioStatic: return "socio-static";
    case FeatureKind::TargetLag: return "target-lag";
    case FeatureKind::BaselineCovariate: return "baseline-covariate";
    case FeatureKind::Exogenous: return "exogenous";
    }
    return "unknown";
}

inline FeatureKind feature_kind_from_string(std::string_view s) {
    for (auto k : {FeatureKind::Month, FeatureKind::Weekday, FeatureKind::Hour, FeatureKind::Holiday,
                   FeatureKind::Temperature, FeatureKind::Humidity, FeatureKind::SocioStatic, FeatureKind::TargetLag,
                   FeatureKind::BaselineCovariate, FeatureKind::Exogenous})
        if (to_string(k) == s) return k;
    throw Error(ErrorKind::Parse, "unknown feature kind '" + std::string(s) + "'");
}

inline std::string_view to_string(Encoding e) {
    switch (e) {
    case Encoding::Categorical: return "categorical-code";
    case Encoding::OneHot: return "one-hot";
    case Encoding::Standardized: return "numeric-standardized";
    case Encoding::Raw: return "numeric-raw";
    }
    return "unknown";
}

inline Encoding encoding_from_string(std::string_view s) {
    for (auto e : {Encoding::Categorical, Encoding::OneHot, Encoding::Standardized, Encoding::Raw})
        if (to_string(e) == s) return e;
    throw Error(ErrorKind::Parse, "unknown encoding '" + std::string(s) + "'");
}

/// Number of categories of a calendar feature, 0 for numeric kinds.
inline int category_count(FeatureKind k) {
    switch (k) {
    case FeatureKind::Month: return 12;
    case FeatureKind::Weekday: return 7;
    case FeatureKind::Hour: return 24;
    case FeatureKind::Holiday: return 2;
    default: return 0;
    }
}

struct FeatureDescriptor {
    std::string name;
    FeatureKind kind = FeatureKind::Hour;
    Encoding encoding = Encoding::Categorical;
    std::size_t lag = 0; // TargetLag only, in steps
    std::string source;  // SocioStatic field, or extra column for Baseline/Exogenous

    bool operator==(const FeatureDescriptor&) const = default;
};

struct FeatureSpec {
    std::vector<FeatureDescriptor> features;

    void validate() const {
        std::set<std::string> names;
        for (const auto& f : features) {
            if (!names.insert(f.name).second) throw Error(ErrorKind::Config, "duplicate feature name '" + f.name + "'");
            const int cats = category_count(f.kind);
            if (cats > 0 && f.encoding != Encoding::Categorical && f.encoding != Encoding::OneHot)
                throw Error(ErrorKind::Config, "feature '" + f.name + "' is calendar-like and needs a categorical encoding");
            if (cats == 0 && (f.encoding == Encoding::Categorical || f.encoding == Encoding::OneHot))
                throw Error(ErrorKind::Config, "feature '" + f.name + "' is numeric and cannot be categorical");
            if (f.kind == FeatureKind::TargetLag && f.lag == 0)
                throw Error(ErrorKind::Config, "lag feature '" + f.name + "' needs a positive lag");
            if (f.kind == FeatureKind::SocioStatic && f.source != "population" && f.source != "density" &&
                f.source != "tsi" && f.source != "gdhi")
                throw Error(ErrorKind::Config, "socio feature '" + f.name + "' has unknown source '" + f.source + "'");
            if ((f.kind == FeatureKind::BaselineCovariate || f.kind == FeatureKind::Exogenous) && f.source.empty())
                throw Error(ErrorKind::Config, "feature '" + f.name + "' needs a source column");
        }
    }

    bool contains(const std::string& name) const {
        return std::any_of(features.begin(), features.end(), [&](const auto& f) { return f.name == name; });
    }

    FeatureSpec with(const FeatureDescriptor& d) const {
        FeatureSpec s = *this;
        s.features.push_back(d);
        return s;
    }

    FeatureSpec without(const std::string& name) const {
        FeatureSpec s = *this;
        std::erase_if(s.features, [&](const auto& f) { return f.name == name; });
        return s;
    }

    /// Largest lag in steps (0 without lag features).
    std::size_t max_lag() const {
        std::size_t m = 0;
        for (const auto& f : features)
            if (f.kind == FeatureKind::TargetLag) m = std::max(m, f.lag);
        return m;
    }
};

inline FeatureDescriptor lag_feature(std::size_t lag) {
    return {"lag_" + std::to_string(lag), FeatureKind::TargetLag, Encoding::Raw, lag, {}};
}

inline FeatureSpec lag_spec(Task task) {
    FeatureSpec s;
    for (auto lag : default_lags(task)) s.features.push_back(lag_feature(lag));
    return s;
}

/// Future-known covariates offered to a consumer type; calendar codes use the
/// tree-model encoding.
inline std::vector<FeatureDescriptor> covariate_candidates(ConsumerType type, Encoding calendar = Encoding::Categorical) {
    std::vector<FeatureDescriptor> c = {
        {"month", FeatureKind::Month, calendar, 0, {}},
        {"weekday", FeatureKind::Weekday, calendar, 0, {}},
        {"hour", FeatureKind::Hour, calendar, 0, {}},
        {"holiday", FeatureKind::Holiday, calendar, 0, {}},
        {"temperature", FeatureKind::Temperature, Encoding::Standardized, 0, {}},
        {"humidity", FeatureKind::Humidity, Encoding::Standardized, 0, {}},
    };
    if (type == ConsumerType::Residential)
        for (const char* src : {"population", "density", "tsi", "gdhi"})
            c.push_back({std::string("socio_") + src, FeatureKind::SocioStatic, Encoding::Raw, 0, src});
    return c;
}

inline FeatureSpec default_feature_spec(ConsumerType type, Task task) {
    FeatureSpec s = lag_spec(task);
    for (auto& d : covariate_candidates(type)) s.features.push_back(d);
    return s;
}

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Affine map sending the training range onto [-1, 1]; values outside the
/// training range extrapolate linearly.
inline double standardize(const Range& train, double v) {
    if (!(train.lo < train.hi)) throw Error(ErrorKind::Standardization, "degenerate training range");
    return 2.0 * (v - train.lo) / (train.hi - train.lo) - 1.0;
}

inline std::vector<double> standardize_weather(const Range& train, std::span<const double> values) {
    if (!(train.lo < train.hi)) throw Error(ErrorKind::Standardization, "degenerate training range");
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(standardize(train, v));
    return out;
}

inline Range fit_range(std::span<const double> values) {
    Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
    }
    if (!(r.lo < r.hi)) throw Error(ErrorKind::Standardization, "degenerate training range");
    return r;
}

struct WeatherScaling {
    Range temperature;
    Range humidity;
};

/// Weather ranges fitted on the first `train_rows` rows of the table.
inline WeatherScaling fit_weather_scaling(const AlignedTable& t, std::size_t train_rows) {
    train_rows = std::min(train_rows, t.size());
    return {fit_range(std::span(t.temperature).first(train_rows)), fit_range(std::span(t.humidity).first(train_rows))};
}

/// Dense row-major design matrix aligned with target timestamps.
struct FeatureMatrix {
    std::vector<Timestamp> timestamps;
    std::vector<std::size_t> source_rows; // row in the originating AlignedTable
    std::vector<std::string> columns;
    std::vector<int> categories; // category count per column, 0 = numeric
    std::vector<double> data;
    std::vector<double> target;

    std::size_t rows() const noexcept { return timestamps.size(); }
    std::size_t cols() const noexcept { return columns.size(); }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows());
        for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
        return out;
    }

    std::optional<std::size_t> column_index(const std::string& name) const {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) return std::nullopt;
        return static_cast<std::size_t>(it - columns.begin());
    }

    FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
        FeatureMatrix m;
        m.columns = columns;
        m.categories = categories;
        m.data.reserve(idx.size() * cols());
        for (auto r : idx) {
            m.timestamps.push_back(timestamps[r]);
            m.source_rows.push_back(source_rows[r]);
            m.target.push_back(target[r]);
            const auto rr = row(r);
            m.data.insert(m.data.end(), rr.begin(), rr.end());
        }
        return m;
    }

    /// Rows whose timestamps fall in [from, to).
    FeatureMatrix between(Timestamp from, Timestamp to) const {
        std::vector<std::size_t> idx;
        for (std::size_t r = 0; r < rows(); ++r)
            if (timestamps[r] >= from && timestamps[r] < to) idx.push_back(r);
        return select_rows(idx);
    }
};

struct BuildOptions {
    std::optional<WeatherScaling> scaling; // fitted on the whole table when absent
    bool keep_missing_target = false;      // keep rows with unknown target (forecasting)
};

namespace detail {

inline int calendar_code(const AlignedTable& t, FeatureKind k, std::size_t row) {
    switch (k) {
    case FeatureKind::Month: return t.month[row] - 1;
    case FeatureKind::Weekday: return t.weekday[row];
    case FeatureKind::Hour: return t.hour[row];
    case FeatureKind::Holiday: return t.holiday[row];
    default: return 0;
    }
}

inline double socio_value(const SocioEconomicRecord& s, const std::string& field) {
    if (field == "population") return s.total_population;
    if (field == "density") return s.population_density;
    if (field == "tsi") return s.tsi;
    return s.gdhi;
}

} // namespace detail

/// Encodes every table row whose lags, covariates and (unless kept) target are
/// available. Lag features must reach back at least `horizon` steps.
inline FeatureMatrix build_matrix(const AlignedTable& table, const FeatureSpec& spec, std::size_t horizon,
                                  const BuildOptions& opts = {}) {
    spec.validate();
    for (const auto& f : spec.features)
        if (f.kind == FeatureKind::TargetLag && f.lag < horizon)
            throw Error(ErrorKind::Config, "lag feature '" + f.name + "' (" + std::to_string(f.lag) +
                                               " steps) is shorter than the horizon (" + std::to_string(horizon) +
                                               " steps)");

    WeatherScaling scaling;
    const bool needs_scaling = std::any_of(spec.features.begin(), spec.features.end(), [](const auto& f) {
        return f.encoding == Encoding::Standardized;
    });
    if (needs_scaling) scaling = opts.scaling ? *opts.scaling : fit_weather_scaling(table, table.size());

    FeatureMatrix m;
    for (const auto& f : spec.features) {
        const int cats = category_count(f.kind);
        if (f.encoding == Encoding::OneHot) {
            for (int c = 0; c < cats; ++c) {
                m.columns.push_back(f.name + "=" + std::to_string(c));
                m.categories.push_back(0);
            }
        } else {
            m.columns.push_back(f.name);
            m.categories.push_back(f.encoding == Encoding::Categorical ? cats : 0);
        }
        if ((f.kind == FeatureKind::SocioStatic) && !table.socio)
            throw Error(ErrorKind::Config, "feature '" + f.name + "' needs a socio-economic record");
        if ((f.kind == FeatureKind::BaselineCovariate || f.kind == FeatureKind::Exogenous) && !table.extra.count(f.source))
            throw Error(ErrorKind::Config, "feature '" + f.name + "' references unknown column '" + f.source + "'");
    }

    std::vector<double> row;
    row.reserve(m.columns.size());
    for (std::size_t r = 0; r < table.size(); ++r) {
        if (!opts.keep_missing_target && std::isnan(table.target[r])) continue;
        row.clear();
        bool ok = true;
        for (const auto& f : spec.features) {
            double v = 0.0;
            switch (f.kind) {
            case FeatureKind::Month:
            case FeatureKind::Weekday:
            case FeatureKind::Hour:
            case FeatureKind::Holiday: {
                const int code = detail::calendar_code(table, f.kind, r);
                if (f.encoding == Encoding::OneHot) {
                    for (int c = 0; c < category_count(f.kind); ++c) row.push_back(c == code ? 1.0 : 0.0);
                    continue;
                }
                v = code;
                break;
            }
            case FeatureKind::Temperature:
                v = f.encoding == Encoding::Standardized ? standardize(scaling.temperature, table.temperature[r])
                                                         : table.temperature[r];
                break;
            case FeatureKind::Humidity:
                v = f.encoding == Encoding::Standardized ? standardize(scaling.humidity, table.humidity[r])
                                                         : table.humidity[r];
                break;
            case FeatureKind::SocioStatic: v = detail::socio_value(*table.socio, f.source); break;
            case FeatureKind::TargetLag: v = r >= f.lag ? table.target[r - f.lag] : std::nan(""); break;
            case FeatureKind::BaselineCovariate:
            case FeatureKind::Exogenous: v = table.extra.at(f.source)[r]; break;
            }
            if (!std::isfinite(v)) {
                ok = false;
                break;
            }
            row.push_back(v);
        }
        if (!ok) continue;
        m.timestamps.push_back(table.timestamps[r]);
        m.source_rows.push_back(r);
        m.target.push_back(table.target[r]);
        m.data.insert(m.data.end(), row.begin(), row.end());
    }
    if (m.rows() == 0)
        throw Error(ErrorKind::EmptyMatrix, "no row of '" + table.consumer_id + "' has all " +
                                                std::to_string(spec.features.size()) +
                                                " features available (largest lag " + std::to_string(spec.max_lag()) +
                                                " steps)");
    return m;
}

} // namespace loadfc
