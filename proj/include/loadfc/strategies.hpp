#pragma once

#include "loadfc/baselines.hpp"
#include "loadfc/ensemble.hpp"
#include "loadfc/features.hpp"
#include "loadfc/parallel.hpp"
#include "loadfc/selection.hpp"
#include "loadfc/serialize.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace loadfc {

enum class Strategy { Single, Fusion, Hybrid };

inline std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::Single: return "single";
    case Strategy::Fusion: return "fusion";
    case Strategy::Hybrid: return "hybrid";
    }
    return "?";
}

inline Strategy strategy_from_string(std::string_view s) {
    if (s == "single") return Strategy::Single;
    if (s == "fusion") return Strategy::Fusion;
    if (s == "hybrid") return Strategy::Hybrid;
    throw Error(ErrorKind::Config, "strategy must be 'single', 'fusion' or 'hybrid', got '" + std::string(s) + "'");
}

inline Strategy default_strategy(ConsumerType t) {
    return t == ConsumerType::Residential ? Strategy::Hybrid : Strategy::Fusion;
}

// industrial plants stop at weekends too; shops open on Saturdays
inline HolidayDefinition default_holiday_definition(ConsumerType t) {
    return t == ConsumerType::Industrial ? HolidayDefinition::PublicHolidaysAndWeekends
                                         : HolidayDefinition::PublicHolidays;
}

inline BaselineParams default_baseline(Task task) {
    BaselineParams b;
    b.kind = task == Task::DayAhead ? BaselineKind::ResidentialDay : BaselineKind::ResidentialQuarterHour;
    return b;
}

/// Holiday route per timestamp (true = holiday submodel). Every timestamp
/// must fall inside the calendar's coverage.
inline std::vector<bool> holiday_routes(const HolidayCalendar& cal, std::span<const Timestamp> ts, HolidayDefinition def) {
    std::vector<bool> out(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto c = cal.time_zone().civil(ts[i]);
        if (!cal.covers(c.date))
            throw Error(ErrorKind::Calendar, format_timestamp(ts[i]) + " is outside the holiday calendar coverage");
        out[i] = cal.is_holiday(ts[i], def);
    }
    return out;
}

struct FusionModel {
    std::optional<TreeEnsembleModel> holiday_model; // absent only when fit with a zero row floor
    std::optional<TreeEnsembleModel> workday_model;
    HolidayDefinition holiday_definition = HolidayDefinition::PublicHolidays;
    FeatureSpec spec;
};

struct FusionOptions {
    std::size_t min_rows = 100; // per partition
    EnsembleMode mode = EnsembleMode::Boosted;
    std::size_t jobs = 1;
};

inline FusionModel fit_fusion(const FeatureMatrix& m, const HolidayCalendar& cal, const GBDTParams& params,
                              HolidayDefinition def, const FeatureSpec& spec, const FusionOptions& opts = {}) {
    const auto routes = holiday_routes(cal, m.timestamps, def);
    std::vector<std::size_t> part[2]; // 0 = workday, 1 = holiday
    for (std::size_t r = 0; r < m.rows(); ++r) part[routes[r] ? 1 : 0].push_back(r);
    const char* names[2] = {"workday", "holiday"};
    for (int k = 0; k < 2; ++k)
        if (part[k].size() < opts.min_rows) {
            const auto other = def == HolidayDefinition::PublicHolidays ? HolidayDefinition::PublicHolidaysAndWeekends
                                                                        : HolidayDefinition::PublicHolidays;
            throw Error(ErrorKind::Partition, std::string(names[k]) + " partition has " + std::to_string(part[k].size()) +
                                                  " training rows under holiday_def '" + std::string(to_string(def)) +
                                                  "' (floor " + std::to_string(opts.min_rows) + "); try holiday_def '" +
                                                  std::string(to_string(other)) + "'");
        }
    FusionModel f;
    f.holiday_definition = def;
    f.spec = spec;
    std::optional<TreeEnsembleModel> fitted[2];
    parallel_for(2, opts.jobs, [&](std::size_t k) {
        if (!part[k].empty()) fitted[k] = fit_ensemble(params, opts.mode, m.select_rows(part[k]));
    });
    f.workday_model = std::move(fitted[0]);
    f.holiday_model = std::move(fitted[1]);
    return f;
}

/// Each row takes exactly the prediction of the submodel its timestamp routes to.
inline std::vector<double> predict_fusion(const FusionModel& f, const FeatureMatrix& m, const HolidayCalendar& cal) {
    const auto routes = holiday_routes(cal, m.timestamps, f.holiday_definition);
    std::vector<std::size_t> part[2];
    for (std::size_t r = 0; r < m.rows(); ++r) part[routes[r] ? 1 : 0].push_back(r);
    std::vector<double> out(m.rows());
    const std::optional<TreeEnsembleModel>* models[2] = {&f.workday_model, &f.holiday_model};
    for (int k = 0; k < 2; ++k) {
        if (part[k].empty()) continue;
        if (!*models[k])
            throw Error(ErrorKind::Partition, format_timestamp(m.timestamps[part[k].front()]) + " routes to the " +
                                                  (k ? "holiday" : "workday") + " submodel, which was never trained");
        const auto pred = predict_ensemble(**models[k], m.select_rows(part[k]));
        for (std::size_t i = 0; i < part[k].size(); ++i) out[part[k][i]] = pred[i];
    }
    return out;
}

inline constexpr const char* kBaselineColumn = "baseline";

/// Copy of the table with the baseline evaluated at every row in
/// extra["baseline"]. The baseline must only reach back `horizon` steps or more.
inline AlignedTable with_baseline_column(const AlignedTable& t, const BaselineParams& b, std::size_t horizon) {
    const auto min_lag = baseline_min_lag(b, t.cadence);
    if (min_lag < horizon)
        throw Error(ErrorKind::Horizon, std::string(to_string(b.kind)) + " uses a lag of " + std::to_string(min_lag) +
                                            " steps, shorter than the horizon of " + std::to_string(horizon) +
                                            " steps (first row " +
                                            (t.size() ? format_timestamp(t.timestamps.front()) : std::string("-")) + ")");
    AlignedTable out = t;
    out.extra[kBaselineColumn] = baseline_column(b, t);
    return out;
}

inline FeatureSpec with_baseline_feature(const FeatureSpec& s) {
    if (s.contains(kBaselineColumn)) return s;
    return s.with({kBaselineColumn, FeatureKind::BaselineCovariate, Encoding::Raw, 0, kBaselineColumn});
}

struct HybridModel {
    TreeEnsembleModel core;
    BaselineParams baseline;
    FeatureSpec spec; // includes the baseline covariate
};

inline HybridModel fit_hybrid(const FeatureMatrix& m, const GBDTParams& params, const BaselineParams& baseline,
                              const FeatureSpec& spec, EnsembleMode mode = EnsembleMode::Boosted) {
    if (!m.column_index(kBaselineColumn))
        throw Error(ErrorKind::Schema, "hybrid training matrix lacks the '" + std::string(kBaselineColumn) + "' column");
    return {fit_ensemble(params, mode, m), baseline, with_baseline_feature(spec)};
}

inline std::vector<double> predict_hybrid(const HybridModel& h, const FeatureMatrix& m) {
    if (!m.column_index(kBaselineColumn))
        throw Error(ErrorKind::Schema, "hybrid prediction matrix lacks the '" + std::string(kBaselineColumn) + "' column");
    return predict_ensemble(h.core, m);
}

/// A consumer forecast tagged with the location it aggregates into.
struct ConsumerForecast {
    std::string consumer_id;
    std::string location;
    std::vector<Timestamp> timestamps;
    std::vector<double> values; // kW
};

struct LocationForecast {
    std::string location;
    std::vector<std::string> consumers;
    std::vector<Timestamp> timestamps;
    std::vector<double> values;
};

/// Element-wise kW sum per location, locations in lexicographic order.
inline std::vector<LocationForecast> aggregate_forecasts(const std::vector<ConsumerForecast>& forecasts) {
    std::map<std::string, LocationForecast> by_loc;
    for (const auto& f : forecasts) {
        if (f.timestamps.size() != f.values.size())
            throw Error(ErrorKind::Alignment, "forecast of '" + f.consumer_id + "' has " +
                                                  std::to_string(f.timestamps.size()) + " timestamps and " +
                                                  std::to_string(f.values.size()) + " values");
        if (!forecasts.empty() && f.timestamps != forecasts.front().timestamps)
            throw Error(ErrorKind::Alignment, "forecast of '" + f.consumer_id + "' is not aligned with '" +
                                                  forecasts.front().consumer_id + "'");
        auto& loc = by_loc[f.location];
        if (loc.consumers.empty()) {
            loc.location = f.location;
            loc.timestamps = f.timestamps;
            loc.values.assign(f.values.size(), 0.0);
        }
        loc.consumers.push_back(f.consumer_id);
        for (std::size_t i = 0; i < f.values.size(); ++i) loc.values[i] += f.values[i];
    }
    std::vector<LocationForecast> out;
    for (auto& [_, v] : by_loc) out.push_back(std::move(v));
    return out;
}

/// Everything needed to forecast one consumer for one task.
struct TrainedModel {
    std::string consumer_id;
    Task task = Task::DayAhead;
    Strategy strategy = Strategy::Single;
    HolidayDefinition holiday_definition = HolidayDefinition::PublicHolidays;
    BaselineParams baseline;
    FeatureSpec spec; // as fed to the trees (hybrid: with the baseline covariate)
    std::optional<WeatherScaling> scaling;
    std::optional<TreeEnsembleModel> core; // single and hybrid
    std::optional<FusionModel> fusion;
};

struct TrainOptions {
    Strategy strategy = Strategy::Single;
    HolidayDefinition holiday_definition = HolidayDefinition::PublicHolidays;
    BaselineParams baseline;
    GBDTParams params;
    EnsembleMode mode = EnsembleMode::Boosted;
    std::size_t min_partition_rows = 100;
    std::size_t jobs = 1;
};

namespace detail {

inline bool spec_needs_scaling(const FeatureSpec& s) {
    return std::any_of(s.features.begin(), s.features.end(),
                       [](const auto& f) { return f.encoding == Encoding::Standardized; });
}

inline FeatureMatrix strategy_matrix(const TrainedModel& m, const AlignedTable& table, bool keep_missing_target) {
    BuildOptions opts;
    opts.scaling = m.scaling;
    opts.keep_missing_target = keep_missing_target;
    const std::size_t horizon = task_horizon(m.task);
    if (m.strategy == Strategy::Hybrid)
        return build_matrix(with_baseline_column(table, m.baseline, horizon), m.spec, horizon, opts);
    return build_matrix(table, m.spec, horizon, opts);
}

} // namespace detail

/// Fits a strategy on rows [0, train_rows) of the table.
inline TrainedModel train_strategy(const AlignedTable& table, std::size_t train_rows, const FeatureSpec& spec, Task task,
                                   const HolidayCalendar& cal, const TrainOptions& opts) {
    TrainedModel m;
    m.consumer_id = table.consumer_id;
    m.task = task;
    m.strategy = opts.strategy;
    m.holiday_definition = opts.holiday_definition;
    m.baseline = opts.baseline;
    m.spec = opts.strategy == Strategy::Hybrid ? with_baseline_feature(spec) : spec;
    if (detail::spec_needs_scaling(m.spec)) m.scaling = fit_weather_scaling(table, train_rows);
    const auto matrix = detail::strategy_matrix(m, table.slice(0, train_rows), false);
    switch (opts.strategy) {
    case Strategy::Single: m.core = fit_ensemble(opts.params, opts.mode, matrix); break;
    case Strategy::Hybrid: m.core = fit_hybrid(matrix, opts.params, opts.baseline, spec, opts.mode).core; break;
    case Strategy::Fusion:
        m.fusion = fit_fusion(matrix, cal, opts.params, opts.holiday_definition, m.spec,
                              {opts.min_partition_rows, opts.mode, opts.jobs});
        break;
    }
    return m;
}

/// Prediction per table row; NaN where the row's inputs are unavailable.
/// Rows with an unknown target are still forecast.
inline std::vector<double> predict_strategy(const TrainedModel& m, const AlignedTable& table, const HolidayCalendar& cal) {
    std::vector<double> out(table.size(), std::numeric_limits<double>::quiet_NaN());
    FeatureMatrix matrix;
    try {
        matrix = detail::strategy_matrix(m, table, true);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::EmptyMatrix) return out;
        throw;
    }
    std::vector<double> pred;
    if (m.strategy == Strategy::Fusion) {
        if (!m.fusion) throw Error(ErrorKind::Config, "fusion model has no submodels");
        pred = predict_fusion(*m.fusion, matrix, cal);
    } else {
        if (!m.core) throw Error(ErrorKind::Config, "model has no core ensemble");
        pred = predict_ensemble(*m.core, matrix);
    }
    for (std::size_t r = 0; r < matrix.rows(); ++r) out[matrix.source_rows[r]] = pred[r];
    return out;
}

inline nlohmann::json baseline_to_json(const BaselineParams& b) {
    return {{"kind", std::string(to_string(b.kind))}, {"w_last", b.w_last}, {"w_day", b.w_day},
            {"w_week", b.w_week}, {"day_lags", b.day_lags}, {"week_lags", b.week_lags}};
}

inline BaselineParams baseline_from_json(const nlohmann::json& j, BaselineParams b = {}) {
    try {
        if (j.contains("kind")) b.kind = baseline_kind_from_string(j.at("kind").get<std::string>());
        if (j.contains("w_last")) b.w_last = j.at("w_last").get<double>();
        if (j.contains("w_day")) b.w_day = j.at("w_day").get<double>();
        if (j.contains("w_week")) b.w_week = j.at("w_week").get<double>();
        if (j.contains("day_lags")) b.day_lags = j.at("day_lags").get<std::size_t>();
        if (j.contains("week_lags")) b.week_lags = j.at("week_lags").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("baseline: ") + e.what());
    }
    b.validate();
    return b;
}

inline nlohmann::json trained_to_json(const TrainedModel& m) {
    nlohmann::json j = {{"version", kModelSchemaVersion},
                        {"consumer_id", m.consumer_id},
                        {"task", std::string(to_string(m.task))},
                        {"strategy", std::string(to_string(m.strategy))},
                        {"holiday_def", std::string(to_string(m.holiday_definition))},
                        {"baseline", baseline_to_json(m.baseline)},
                        {"spec", feature_spec_to_json(m.spec)}};
    if (m.scaling)
        j["scaling"] = {{"temperature", {m.scaling->temperature.lo, m.scaling->temperature.hi}},
                        {"humidity", {m.scaling->humidity.lo, m.scaling->humidity.hi}}};
    if (m.core) j["core"] = model_to_json(*m.core);
    if (m.fusion) {
        if (m.fusion->workday_model) j["workday_model"] = model_to_json(*m.fusion->workday_model);
        if (m.fusion->holiday_model) j["holiday_model"] = model_to_json(*m.fusion->holiday_model);
    }
    return j;
}

inline TrainedModel trained_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("version")) throw Error(ErrorKind::Schema, "model bundle lacks a version");
    if (j.at("version") != kModelSchemaVersion)
        throw Error(ErrorKind::Version, "unsupported model bundle version " + j.at("version").dump());
    TrainedModel m;
    try {
        m.consumer_id = j.at("consumer_id").get<std::string>();
        m.task = task_from_string(j.at("task").get<std::string>());
        m.strategy = strategy_from_string(j.at("strategy").get<std::string>());
        m.holiday_definition = holiday_definition_from_string(j.at("holiday_def").get<std::string>());
        m.baseline = baseline_from_json(j.at("baseline"));
        m.spec = feature_spec_from_json(j.at("spec"));
        if (j.contains("scaling")) {
            const auto& s = j.at("scaling");
            m.scaling = WeatherScaling{{s.at("temperature").at(0).get<double>(), s.at("temperature").at(1).get<double>()},
                                       {s.at("humidity").at(0).get<double>(), s.at("humidity").at(1).get<double>()}};
        }
        if (j.contains("core")) m.core = model_from_json(j.at("core"));
        if (m.strategy == Strategy::Fusion) {
            FusionModel f;
            f.holiday_definition = m.holiday_definition;
            f.spec = m.spec;
            if (j.contains("workday_model")) f.workday_model = model_from_json(j.at("workday_model"));
            if (j.contains("holiday_model")) f.holiday_model = model_from_json(j.at("holiday_model"));
            m.fusion = std::move(f);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("model bundle: ") + e.what());
    }
    if (m.strategy == Strategy::Fusion ? !m.fusion : !m.core)
        throw Error(ErrorKind::Schema, "model bundle has no model for strategy '" + std::string(to_string(m.strategy)) + "'");
    return m;
}

} // namespace loadfc
