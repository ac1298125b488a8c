#pragma once

#include "loadfc/align.hpp"
#include "loadfc/baselines.hpp"
#include "loadfc/classifier.hpp"
#include "loadfc/evaluation.hpp"
#include "loadfc/features.hpp"
#include "loadfc/io.hpp"
#include "loadfc/parallel.hpp"
#include "loadfc/selection.hpp"
#include "loadfc/serialize.hpp"
#include "loadfc/split.hpp"
#include "loadfc/strategies.hpp"
#include "loadfc/tpe.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace loadfc {

namespace fs = std::filesystem;

/// Per-consumer settings that override the type defaults.
struct ConsumerOverride {
    std::optional<Strategy> strategy;
    std::optional<HolidayDefinition> holiday_definition;
    nlohmann::json policy = nlohmann::json::object(); // partial ThresholdPolicy
};

struct RunConfig {
    fs::path load_dir = "load";
    fs::path consumers = "consumers.csv"; // consumer_id,zone_id,location,cadence_min
    fs::path labels;                      // optional consumer_id,type
    fs::path weather_dir = "weather";     // <zone>.csv
    fs::path holidays = "holidays.txt";
    fs::path socio;                       // optional
    fs::path output = "out";
    std::string time_zone = "Europe/Madrid";
    SplitFractions split;
    std::vector<Task> tasks{Task::DayAhead, Task::QuarterHour};
    bool select_features = true;
    std::size_t tuner_budget = 0; // 0 = default parameters
    GBDTParams params;
    ThresholdPolicy policy;
    ThresholdPolicy residential = ThresholdPolicy::for_type(ConsumerType::Residential);
    std::map<std::string, ConsumerOverride> overrides;
    std::uint64_t seed = 42;
    std::size_t jobs = 1;

    void validate() const {
        split.validate();
        params.validate();
        policy.validate();
        residential.validate();
        if (tasks.empty()) throw Error(ErrorKind::Config, "no task selected");
    }

    /// Relative paths resolve against `base_dir` (the config file's directory).
    static RunConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
        if (!j.is_object()) throw Error(ErrorKind::Config, "run config must be a JSON object");
        RunConfig c;
        auto path = [&](const nlohmann::json& obj, const char* key, fs::path& field) {
            if (!obj.contains(key)) return;
            fs::path p = obj.at(key).get<std::string>();
            field = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
        };
        try {
            if (j.contains("paths")) {
                const auto& p = j.at("paths");
                fs::path data;
                path(p, "data", data);
                if (!data.empty()) {
                    c.load_dir = data / "load";
                    c.consumers = data / "consumers.csv";
                    c.labels = data / "labels.csv";
                    c.weather_dir = data / "weather";
                    c.holidays = data / "holidays.txt";
                    c.socio = data / "socio.csv";
                } else {
                    for (auto* f : {&c.load_dir, &c.consumers, &c.weather_dir, &c.holidays, &c.output})
                        if (f->is_relative() && !base_dir.empty()) *f = base_dir / *f;
                }
                path(p, "load_dir", c.load_dir);
                path(p, "consumers", c.consumers);
                path(p, "labels", c.labels);
                path(p, "weather_dir", c.weather_dir);
                path(p, "holidays", c.holidays);
                path(p, "socio", c.socio);
                path(p, "output", c.output);
            }
            if (j.contains("time_zone")) c.time_zone = j.at("time_zone").get<std::string>();
            if (j.contains("split")) {
                const auto& s = j.at("split");
                c.split.train = s.value("train", c.split.train);
                c.split.validation = s.value("validation", c.split.validation);
                c.split.test = s.value("test", c.split.test);
            }
            if (j.contains("tasks")) {
                c.tasks.clear();
                for (const auto& t : j.at("tasks")) c.tasks.push_back(task_from_string(t.get<std::string>()));
            }
            c.select_features = j.value("select_features", c.select_features);
            c.tuner_budget = j.value("tuner_budget", c.tuner_budget);
            if (j.contains("gbdt")) c.params = params_from_json(j.at("gbdt"), c.params);
            if (j.contains("policy")) c.policy = policy_from_json(j.at("policy"), c.policy);
            if (j.contains("residential_policy")) c.residential = policy_from_json(j.at("residential_policy"), c.residential);
            if (j.contains("consumers")) {
                for (const auto& [id, o] : j.at("consumers").items()) {
                    ConsumerOverride ov;
                    if (o.contains("strategy")) ov.strategy = strategy_from_string(o.at("strategy").get<std::string>());
                    if (o.contains("holiday_def"))
                        ov.holiday_definition = holiday_definition_from_string(o.at("holiday_def").get<std::string>());
                    if (o.contains("policy")) ov.policy = o.at("policy");
                    c.overrides[id] = ov;
                }
            }
            c.seed = j.value("seed", c.seed);
            c.jobs = j.value("jobs", c.jobs);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Config, std::string("run config: ") + e.what());
        }
        c.validate();
        return c;
    }

    nlohmann::json to_json() const {
        nlohmann::json tasks_j = nlohmann::json::array();
        for (auto t : tasks) tasks_j.push_back(std::string(to_string(t)));
        nlohmann::json over = nlohmann::json::object();
        for (const auto& [id, o] : overrides) {
            nlohmann::json e = nlohmann::json::object();
            if (o.strategy) e["strategy"] = std::string(to_string(*o.strategy));
            if (o.holiday_definition) e["holiday_def"] = std::string(to_string(*o.holiday_definition));
            if (!o.policy.empty()) e["policy"] = o.policy;
            over[id] = e;
        }
        return {{"paths",
                 {{"load_dir", load_dir.string()},
                  {"consumers", consumers.string()},
                  {"labels", labels.string()},
                  {"weather_dir", weather_dir.string()},
                  {"holidays", holidays.string()},
                  {"socio", socio.string()},
                  {"output", output.string()}}},
                {"time_zone", time_zone},
                {"split", {{"train", split.train}, {"validation", split.validation}, {"test", split.test}}},
                {"tasks", tasks_j},
                {"select_features", select_features},
                {"tuner_budget", tuner_budget},
                {"gbdt", params_to_json(params)},
                {"policy", policy_to_json(policy)},
                {"residential_policy", policy_to_json(residential)},
                {"consumers", over},
                {"seed", seed},
                {"jobs", jobs}};
    }
};

inline RunConfig load_run_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + file.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, "config " + file.string() + ": " + e.what());
    }
    return RunConfig::from_json(j, file.parent_path());
}

/// One line of consumers.csv.
struct ConsumerEntry {
    std::string consumer_id;
    std::string zone_id;
    std::string location;
    Cadence cadence = Cadence::QuarterHour;
};

inline std::vector<ConsumerEntry> read_consumers_csv(const fs::path& path) {
    auto in = csv::open(path);
    const auto t = csv::read(in, "consumer_id,zone_id,location,cadence_min", "consumers csv");
    std::vector<ConsumerEntry> out;
    for (const auto& [row, f] : t.rows) {
        if (f.size() != 4) throw Error(ErrorKind::Parse, "consumers csv row " + std::to_string(row) + ": expected 4 fields");
        const auto minutes = csv::parse_number(f[3]);
        if (!minutes) throw Error(ErrorKind::Parse, "consumers csv row " + std::to_string(row) + ": bad cadence");
        out.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]), cadence_from_minutes(static_cast<long>(*minutes))});
    }
    return out;
}

inline std::map<std::string, ConsumerType> read_labels_csv(const fs::path& path) {
    auto in = csv::open(path);
    const auto t = csv::read(in, "consumer_id,type", "labels csv");
    std::map<std::string, ConsumerType> out;
    for (const auto& [row, f] : t.rows) {
        if (f.size() != 2) throw Error(ErrorKind::Parse, "labels csv row " + std::to_string(row) + ": expected 2 fields");
        out[std::string(f[0])] = consumer_type_from_string(f[1]);
    }
    return out;
}

/// Tunes the single GBDT on the training split against validation MAPE.
inline TuneResult tune_gbdt(const AlignedTable& table, const FeatureSpec& spec, Task task, const SplitFractions& split,
                            const GBDTParams& base, const SearchSpace& space, const TPEConfig& tpe, std::size_t budget) {
    const auto cut = chronological_split(table.size(), split);
    BuildOptions opts;
    if (detail::spec_needs_scaling(spec)) opts.scaling = fit_weather_scaling(table, cut.train_end);
    const auto m = build_matrix(table.slice(0, cut.val_end), spec, task_horizon(task), opts);
    const auto train_end = static_cast<std::size_t>(
        std::lower_bound(m.source_rows.begin(), m.source_rows.end(), cut.train_end) - m.source_rows.begin());
    const auto train = row_range(m, 0, train_end);
    const auto val = row_range(m, train_end, m.rows());
    if (train.rows() == 0 || val.rows() == 0)
        throw Error(ErrorKind::InsufficientData, "tuning needs both training and validation rows");
    return tune(
        [&](const Assignment& x) {
            const auto model = fit_ensemble(apply_assignment(space, x, base), EnsembleMode::Boosted, train);
            return error_of(ErrorMetric::Mape, val.target, predict_ensemble(model, val));
        },
        space, tpe, budget);
}

/// Outcome of one consumer and task.
struct TaskResult {
    Task task = Task::DayAhead;
    Strategy strategy = Strategy::Single;
    EvalReport single;
    EvalReport deployed; // equals `single` for the single strategy
    EvalReport baseline;
    std::vector<Timestamp> test_timestamps;
    std::vector<double> test_forecast; // deployed model, pointwise
    std::vector<std::string> selected;
};

struct ConsumerResult {
    std::string consumer_id;
    std::string location;
    std::optional<ConsumerType> declared;
    ConsumerType type = ConsumerType::Residential;
    ProfileStats stats;
    ClassificationRule rule = ClassificationRule::Fallback;
    std::vector<TaskResult> tasks;
    std::optional<std::string> error_stage;
    std::string error;
    std::optional<ErrorKind> error_kind;

    bool passed() const {
        if (error_stage) return false;
        for (const auto& t : tasks)
            if (!t.deployed.passed()) return false;
        return true;
    }
};

struct RunSummary {
    int exit_code = 0;
    std::vector<ConsumerResult> consumers;
    std::vector<std::string> errors; // "location/stage: message" for aggregation problems
};

namespace detail {

inline std::ofstream open_out(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
    return out;
}

inline void write_text(const fs::path& p, const std::string& text) {
    auto out = open_out(p);
    out << text;
}

inline std::string task_dir(Task t) { return t == Task::DayAhead ? "day-ahead" : "15-min"; }

/// Runs `fn` and rethrows library errors as stage errors.
template <class Fn>
auto staged(const std::string& consumer, const std::string& stage, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(e, consumer, stage);
    } catch (const std::exception& e) {
        throw StageError(Error(ErrorKind::Io, e.what()), consumer, stage);
    }
}

} // namespace detail

/// Forecast issued by one trained model; `fingerprint` identifies the model.
struct ForecastArtifact {
    std::string consumer_id;
    Task task = Task::DayAhead;
    Timestamp issued_at{};
    std::vector<Timestamp> timestamps;
    std::vector<double> kw;
    std::string fingerprint;
};

inline constexpr const char* kForecastCsvHeader = "consumer_id,task,issued_at,step,timestamp,kw,fingerprint";

inline void write_forecast_csv(std::ostream& out, const ForecastArtifact& f) {
    out << kForecastCsvHeader << '\n';
    for (std::size_t i = 0; i < f.timestamps.size(); ++i)
        out << f.consumer_id << ',' << to_string(f.task) << ',' << format_timestamp(f.issued_at) << ',' << i + 1 << ','
            << format_timestamp(f.timestamps[i]) << ',' << format_double(f.kw[i]) << ',' << f.fingerprint << '\n';
}

inline ForecastArtifact read_forecast_csv(const fs::path& path) {
    auto in = csv::open(path);
    const auto t = csv::read(in, kForecastCsvHeader, "forecast csv");
    ForecastArtifact f;
    auto bad = [&](std::size_t row, const std::string& what) {
        return Error(ErrorKind::Parse, path.string() + " row " + std::to_string(row) + ": " + what);
    };
    for (const auto& [row, v] : t.rows) {
        if (v.size() != 7) throw bad(row, "expected 7 fields");
        const auto issued = parse_timestamp(v[2]);
        const auto ts = parse_timestamp(v[4]);
        const auto kw = csv::parse_number(v[5]);
        if (!issued || !ts || !kw) throw bad(row, "unparseable field");
        if (f.timestamps.empty()) {
            f.consumer_id = std::string(v[0]);
            f.task = task_from_string(v[1]);
            f.issued_at = *issued;
            f.fingerprint = std::string(v[6]);
        } else if (v[0] != f.consumer_id || *issued != f.issued_at || v[6] != f.fingerprint) {
            throw bad(row, "file mixes several forecasts");
        }
        f.timestamps.push_back(*ts);
        f.kw.push_back(*kw);
    }
    if (f.timestamps.empty()) throw Error(ErrorKind::Parse, path.string() + ": no forecast rows");
    return f;
}

/// Issues the forecast of `model` for the `horizon` steps after `issued_at`
/// (rows of `table`, whose target may be missing there).
inline ForecastArtifact issue_forecast(const TrainedModel& model, const AlignedTable& table, const HolidayCalendar& cal,
                                       Timestamp issued_at) {
    const std::size_t h = task_horizon(model.task);
    const Duration step = cadence_duration(table.cadence);
    const auto first_it = std::lower_bound(table.timestamps.begin(), table.timestamps.end(), issued_at + step);
    if (first_it == table.timestamps.end() || *first_it != issued_at + step ||
        static_cast<std::size_t>(table.timestamps.end() - first_it) < h)
        throw Error(ErrorKind::Horizon, "no covariate rows for the " + std::to_string(h) + " steps after " +
                                            format_timestamp(issued_at));
    const auto first = static_cast<std::size_t>(first_it - table.timestamps.begin());
    // only the rows the lags reach are needed
    std::size_t max_lag = std::max(model.spec.max_lag(), baseline_max_lag(model.baseline, table.cadence));
    const std::size_t from = first > max_lag ? first - max_lag : 0;
    const auto window = table.slice(from, first + h - from);
    const auto pred = predict_strategy(model, window, cal);
    ForecastArtifact f;
    f.consumer_id = model.consumer_id;
    f.task = model.task;
    f.issued_at = issued_at;
    f.fingerprint = model_fingerprint(trained_to_json(model).dump());
    for (std::size_t i = first - from; i < pred.size(); ++i) {
        if (!std::isfinite(pred[i]))
            throw Error(ErrorKind::Horizon, "forecast for " + format_timestamp(window.timestamps[i]) +
                                                " needs observations that are missing");
        f.timestamps.push_back(window.timestamps[i]);
        f.kw.push_back(pred[i]);
    }
    return f;
}

struct RunContext {
    RunConfig config;
    HolidayCalendar calendar;
    std::map<std::string, SocioEconomicRecord> socio;
    std::map<std::string, ConsumerType> labels;
    std::vector<ConsumerEntry> entries;

    const ConsumerEntry& entry(const std::string& id) const {
        for (const auto& e : entries)
            if (e.consumer_id == id) return e;
        throw Error(ErrorKind::Config, "consumer '" + id + "' is not listed in " + config.consumers.string());
    }
};

/// Reads the shared inputs (calendar, consumer list, socio, labels).
inline RunContext make_context(const RunConfig& config) {
    config.validate();
    RunContext ctx;
    ctx.config = config;
    try {
        ctx.calendar = read_holiday_calendar(config.holidays, TimeZone::from_name(config.time_zone));
        ctx.entries = read_consumers_csv(config.consumers);
        if (!config.socio.empty() && fs::exists(config.socio)) ctx.socio = read_socio_csv(config.socio);
        if (!config.labels.empty() && fs::exists(config.labels)) ctx.labels = read_labels_csv(config.labels);
    } catch (const Error& e) {
        throw StageError(e, "*", "load_inputs");
    }
    return ctx;
}

inline LoadSeries load_consumer(const RunContext& ctx, const ConsumerEntry& entry) {
    return detail::staged(entry.consumer_id, "ingest", [&] {
        IngestOptions io;
        io.consumer_id = entry.consumer_id;
        return ingest_load_csv(ctx.config.load_dir / (entry.consumer_id + ".csv"), entry.cadence, io);
    });
}

inline Classification classify_consumer(const RunContext& ctx, const LoadSeries& load, ProfileStats* stats = nullptr) {
    return detail::staged(load.consumer_id(), "classify", [&] {
        const auto hourly = load.cadence() == Cadence::QuarterHour ? resample_to_hourly(load) : load;
        const auto s = profile_stats(hourly, ctx.calendar);
        if (stats) *stats = s;
        return classify_detailed(s);
    });
}

/// Aligned table at the task's cadence. `extra_steps` appends rows with a
/// missing target past the end of the load, for forecasting beyond the data.
inline AlignedTable consumer_table(const RunContext& ctx, const ConsumerEntry& entry, const LoadSeries& load, Task task,
                                   std::size_t extra_steps = 0) {
    return detail::staged(entry.consumer_id, "align_covariates", [&] {
        auto series = task == Task::DayAhead && load.cadence() == Cadence::QuarterHour ? resample_to_hourly(load) : load;
        if (task == Task::QuarterHour && series.cadence() != Cadence::QuarterHour)
            throw Error(ErrorKind::Data, "15-min task needs quarter-hour load");
        if (extra_steps > 0) {
            std::vector<double> v(series.values().begin(), series.values().end());
            std::vector<bool> miss(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) miss[i] = series.is_missing(i);
            v.resize(v.size() + extra_steps, 0.0);
            miss.resize(v.size(), true);
            series = LoadSeries(series.consumer_id(), series.start(), series.cadence(), std::move(v), std::move(miss));
        }
        const auto weather = read_weather_csv(ctx.config.weather_dir / (entry.zone_id + ".csv"), entry.zone_id);
        std::optional<SocioEconomicRecord> socio;
        if (auto it = ctx.socio.find(entry.zone_id); it != ctx.socio.end()) socio = it->second;
        return align_covariates(series, weather, ctx.calendar, socio);
    });
}

/// Ablation-based selection (lags as the base set, covariates as candidates).
inline FeatureAblationReport select_for(const RunContext& ctx, const AlignedTable& table, ConsumerType type, Task task) {
    return detail::staged(table.consumer_id, "select_features", [&] {
        FeatureSpec candidates;
        candidates.features = covariate_candidates(type);
        AblationProtocol protocol;
        protocol.models = default_ablation_models(derive_seed(ctx.config.seed, "ablation"));
        protocol.split = ctx.config.split;
        protocol.horizon = task_horizon(task);
        return ablate_features(candidates, lag_spec(task), table, protocol);
    });
}

inline TrainOptions train_options(const RunContext& ctx, const std::string& id, ConsumerType type, Task task,
                                  const GBDTParams& params) {
    const auto it = ctx.config.overrides.find(id);
    const ConsumerOverride ov = it == ctx.config.overrides.end() ? ConsumerOverride{} : it->second;
    TrainOptions o;
    o.params = params;
    o.params.seed = derive_seed(ctx.config.seed, "gbdt/" + id);
    o.strategy = ov.strategy.value_or(default_strategy(type));
    o.holiday_definition = ov.holiday_definition.value_or(default_holiday_definition(type));
    o.baseline = default_baseline(task);
    o.jobs = 1;
    return o;
}

inline ThresholdPolicy policy_for(const RunContext& ctx, const std::string& id, ConsumerType type) {
    ThresholdPolicy policy = type == ConsumerType::Residential ? ctx.config.residential : ctx.config.policy;
    if (auto it = ctx.config.overrides.find(id); it != ctx.config.overrides.end() && !it->second.policy.empty())
        policy = detail::staged(id, "config", [&] { return policy_from_json(it->second.policy, policy); });
    return policy;
}

inline TuneResult tune_for(const RunContext& ctx, const AlignedTable& table, const FeatureSpec& spec, Task task,
                           std::size_t budget, const SearchSpace& space) {
    return detail::staged(table.consumer_id, "tune", [&] {
        TPEConfig tpe;
        tpe.seed = derive_seed(ctx.config.seed, "tuner/" + table.consumer_id + "/" + detail::task_dir(task));
        return tune_gbdt(table, spec, task, ctx.config.split, ctx.config.params, space, tpe, budget);
    });
}

/// Everything for one consumer and one task: selection, optional tuning,
/// training on train+validation, rolling evaluation on the test split and
/// the per-consumer artifacts.
inline TaskResult run_task(const RunContext& ctx, const ConsumerEntry& entry, const LoadSeries& load, ConsumerType type,
                           Task task) {
    const auto& cfg = ctx.config;
    const auto& id = entry.consumer_id;
    const fs::path dir = cfg.output / "consumers" / id / detail::task_dir(task);
    TaskResult res;
    res.task = task;

    const auto table = consumer_table(ctx, entry, load, task);
    const auto cut = chronological_split(table.size(), cfg.split);
    const std::size_t horizon = task_horizon(task);

    FeatureSpec spec = default_feature_spec(type, task);
    if (cfg.select_features) {
        const auto rep = select_for(ctx, table, type, task);
        spec = rep.selected;
        res.selected = rep.kept;
        detail::staged(id, "write", [&] {
            auto csv = detail::open_out(dir / "selection.csv");
            write_ablation_csv(csv, rep);
            detail::write_text(dir / "selection.json", ablation_to_json(rep).dump(2) + "\n");
            return 0;
        });
    }

    GBDTParams params = cfg.params;
    if (cfg.tuner_budget > 0) {
        const auto space = default_gbdt_space();
        const auto tr = tune_for(ctx, table, spec, task, cfg.tuner_budget, space);
        params = apply_assignment(space, tr.best.x, params);
        detail::staged(id, "write", [&] {
            auto csv = detail::open_out(dir / "trials.csv");
            write_trials_csv(csv, space, tr.history);
            detail::write_text(dir / "best_params.json", params_to_json(params).dump(2) + "\n");
            return 0;
        });
    }

    const TrainOptions deployed_opts = train_options(ctx, id, type, task, params);
    TrainOptions single_opts = deployed_opts;
    single_opts.strategy = Strategy::Single;
    res.strategy = deployed_opts.strategy;
    const ThresholdPolicy policy = policy_for(ctx, id, type);

    std::vector<TrainedModel> models;
    detail::staged(id, "train", [&] {
        models.push_back(train_strategy(table, cut.val_end, spec, task, ctx.calendar, single_opts));
        if (res.strategy != Strategy::Single)
            models.push_back(train_strategy(table, cut.val_end, spec, task, ctx.calendar, deployed_opts));
        return 0;
    });

    std::vector<std::vector<double>> preds;
    detail::staged(id, "forecast", [&] {
        for (const auto& m : models) preds.push_back(predict_strategy(m, table, ctx.calendar));
        return 0;
    });

    const auto test = table.slice(cut.val_end, table.size() - cut.val_end);
    auto test_part = [&](const std::vector<double>& v) {
        return std::vector<double>(v.begin() + static_cast<long>(cut.val_end), v.end());
    };
    BaselineParams persist;
    persist.kind = task == Task::DayAhead ? BaselineKind::PersistPreviousDay : BaselineKind::PersistLastStep;
    const auto baseline_pred = test_part(baseline_column(persist, table));

    detail::staged(id, "evaluate", [&] {
        auto evaluate = [&](const std::vector<double>& p) {
            return task == Task::DayAhead ? rolling_day_ahead(id, test.timestamps, test.target, p, policy)
                                          : rolling_15min(id, test.timestamps, test.target, p, policy);
        };
        res.single = evaluate(test_part(preds[0]));
        res.deployed = res.strategy == Strategy::Single ? res.single : evaluate(test_part(preds.back()));
        res.baseline = evaluate(baseline_pred);
        res.test_timestamps = test.timestamps;
        res.test_forecast = test_part(preds.back());
        return 0;
    });

    detail::staged(id, "write", [&] {
        auto holiday = [&](Timestamp t) { return ctx.calendar.is_holiday(t, deployed_opts.holiday_definition); };
        auto emit = [&](const std::string& label, const EvalReport& r) {
            detail::write_text(dir / ("report_" + label + ".json"), report_to_json(r).dump(2) + "\n");
            auto w = detail::open_out(dir / ("windows_" + label + ".csv"));
            write_windows_csv(w, r);
            auto svg = detail::open_out(dir / ("mape_" + label + ".svg"));
            write_mape_svg(svg, r, holiday);
        };
        emit("single", res.single);
        if (res.strategy != Strategy::Single) emit(std::string(to_string(res.strategy)), res.deployed);
        emit("baseline", res.baseline);
        for (std::size_t k = 0; k < models.size(); ++k) {
            const auto label = k == 0 ? std::string("single") : std::string(to_string(models[k].strategy));
            detail::write_text(dir / ("model_" + label + ".json"), trained_to_json(models[k]).dump() + "\n");
        }
        // forecast for the last day of the test span from the deployed model
        const std::size_t h = horizon;
        if (table.size() >= cut.val_end + h) {
            const Timestamp issued = table.timestamps[table.size() - h] - cadence_duration(table.cadence);
            try {
                const auto f = issue_forecast(models.back(), table, ctx.calendar, issued);
                auto out = detail::open_out(dir / "forecast.csv");
                write_forecast_csv(out, f);
            } catch (const Error&) {
                // lag rows missing at the end of the data: no forecast artifact
            }
        }
        return 0;
    });
    return res;
}

inline ConsumerResult run_consumer(const RunContext& ctx, const ConsumerEntry& entry) {
    ConsumerResult cr;
    cr.consumer_id = entry.consumer_id;
    cr.location = entry.location;
    if (auto it = ctx.labels.find(entry.consumer_id); it != ctx.labels.end()) cr.declared = it->second;
    try {
        const auto load = load_consumer(ctx, entry);
        const auto c = classify_consumer(ctx, load, &cr.stats);
        cr.type = c.type;
        cr.rule = c.rule;
        for (auto task : ctx.config.tasks) {
            if (task == Task::QuarterHour && load.cadence() != Cadence::QuarterHour) continue;
            cr.tasks.push_back(run_task(ctx, entry, load, cr.type, task));
        }
    } catch (const StageError& e) {
        cr.error_stage = e.stage();
        cr.error = e.what();
        cr.error_kind = e.kind();
    }
    return cr;
}

inline constexpr const char* kSummaryHeader =
    "consumer_id,location,type,task,model,strategy,mape_pct,mae_kw,score_mape_pct,score_mae_pct,mape_threshold_pct,"
    "mae_threshold_kw,score_target_pct,windows,excluded_windows,passed";

namespace detail {

inline void summary_row(std::ostream& out, const ConsumerResult& c, const TaskResult& t, const std::string& model,
                        const EvalReport& r) {
    out << c.consumer_id << ',' << c.location << ',' << to_string(c.type) << ',' << to_string(t.task) << ',' << model << ','
        << to_string(t.strategy) << ',' << format_double(r.aggregate_mape) << ',' << format_double(r.aggregate_mae) << ','
        << format_double(r.score_mape) << ',' << format_double(r.score_mae) << ',' << format_double(r.mape_threshold)
        << ',' << format_double(r.mae_threshold) << ',' << format_double(r.score_target) << ',' << r.windows.size() << ','
        << r.excluded_windows << ',' << (r.passed() ? 1 : 0) << '\n';
}

} // namespace detail

/// Writes the run-level artifacts; returns the exit code (0 all targets met,
/// 2 some target missed, 1 any error).
inline int write_run_artifacts(const RunContext& ctx, RunSummary& run) {
    const auto& out = ctx.config.output;
    bool any_error = false, all_pass = true;

    std::ostringstream classification, summary, comparison, errors;
    classification << "consumer_id,declared,predicted,rule,c_h,c_w,c_sat,c_sun,hourly_std\n";
    summary << kSummaryHeader << '\n';
    comparison << kComparisonCsvHeader << '\n';
    errors << "consumer_id,stage,kind,message\n";
    ConfusionMatrix confusion;
    bool have_labels = false;
    for (const auto& c : run.consumers) {
        if (c.error_stage) {
            any_error = true;
            std::string msg = c.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            errors << c.consumer_id << ',' << *c.error_stage << ',' << to_string(*c.error_kind) << ',' << msg << '\n';
            if (*c.error_stage == "ingest" || *c.error_stage == "classify") continue;
        }
        classification << c.consumer_id << ',' << (c.declared ? std::string(to_string(*c.declared)) : std::string()) << ','
                       << to_string(c.type) << ',' << to_string(c.rule) << ',' << format_double(c.stats.c_h) << ','
                       << format_double(c.stats.c_w) << ',' << format_double(c.stats.c_sat) << ','
                       << format_double(c.stats.c_sun) << ',' << format_double(c.stats.hourly_std) << '\n';
        if (c.declared) {
            confusion.add(*c.declared, c.type);
            have_labels = true;
        }
        if (!c.passed()) all_pass = false;
        for (const auto& t : c.tasks) {
            detail::summary_row(summary, c, t, "single", t.single);
            if (t.strategy != Strategy::Single) detail::summary_row(summary, c, t, std::string(to_string(t.strategy)), t.deployed);
            detail::summary_row(summary, c, t, "baseline", t.baseline);
            if (t.strategy != Strategy::Single)
                write_comparison_row(comparison, compare_reports(t.single, t.deployed, "single", std::string(to_string(t.strategy))));
        }
    }

    // per-location sums of the deployed forecasts over the test span
    for (auto task : ctx.config.tasks) {
        std::map<std::string, std::vector<ConsumerForecast>> by_loc;
        for (const auto& c : run.consumers)
            for (const auto& t : c.tasks)
                if (t.task == task && !c.error_stage)
                    by_loc[c.location].push_back({c.consumer_id, c.location, t.test_timestamps, t.test_forecast});
        for (const auto& [loc, fcs] : by_loc) {
            try {
                const auto agg = aggregate_forecasts(fcs);
                auto f = detail::open_out(out / "aggregate" / detail::task_dir(task) / (loc + ".csv"));
                f << "timestamp,kw\n";
                for (std::size_t i = 0; i < agg.front().timestamps.size(); ++i)
                    f << format_timestamp(agg.front().timestamps[i]) << ',' << format_double(agg.front().values[i]) << '\n';
            } catch (const Error& e) {
                any_error = true;
                run.errors.push_back(loc + "/aggregate: " + e.detail());
                errors << loc << ",aggregate," << to_string(e.kind()) << ',' << e.detail() << '\n';
            }
        }
    }

    detail::write_text(out / "classification.csv", classification.str());
    if (have_labels) {
        auto f = detail::open_out(out / "confusion.csv");
        confusion.write_csv(f);
    }
    detail::write_text(out / "summary.csv", summary.str());
    detail::write_text(out / "comparison.csv", comparison.str());
    detail::write_text(out / "errors.csv", errors.str());
    run.exit_code = any_error ? 1 : (all_pass ? 0 : 2);
    nlohmann::json status = {{"exit_code", run.exit_code},
                             {"consumers", run.consumers.size()},
                             {"threshold_note", kThresholdNote},
                             {"config", ctx.config.to_json()}};
    detail::write_text(out / "run.json", status.dump(2) + "\n");
    return run.exit_code;
}

/// End-to-end run over every consumer listed in the config. Consumer-level
/// failures are recorded (errors.csv) and turn the exit code to 1.
inline RunSummary run_pipeline(const RunConfig& config) {
    const RunContext ctx = make_context(config);
    RunSummary run;
    fs::create_directories(config.output);
    run.consumers.resize(ctx.entries.size());
    parallel_for(ctx.entries.size(), config.jobs,
                 [&](std::size_t i) { run.consumers[i] = run_consumer(ctx, ctx.entries[i]); });
    write_run_artifacts(ctx, run);
    return run;
}

/// Human-readable summary of a finished run directory (report.md content).
inline std::string render_report(const fs::path& out_dir) {
    std::vector<std::string> missing;
    for (const char* f : {"run.json", "summary.csv", "comparison.csv", "classification.csv"})
        if (!fs::exists(out_dir / f)) missing.push_back(f);
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw Error(ErrorKind::Io, "run artifacts missing in " + out_dir.string() + ": " + list);
    }
    auto read_rows = [&](const char* name) {
        auto in = csv::open(out_dir / name);
        std::vector<std::vector<std::string>> rows;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> f;
            for (auto s : csv::split(line)) f.emplace_back(s);
            rows.push_back(std::move(f));
        }
        return rows;
    };
    auto fixed = [](const std::string& s, int digits) {
        if (s.empty()) return std::string("-");
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f", digits, std::stod(s));
        return std::string(buf);
    };
    std::ostringstream md;
    nlohmann::json status;
    {
        std::ifstream in(out_dir / "run.json");
        status = nlohmann::json::parse(in, nullptr, false);
    }
    md << "# Forecasting run summary\n\n";
    if (status.is_object()) md << "Exit code: " << status.value("exit_code", -1) << "\n\n";
    md << "Note: " << kThresholdNote << ".\n\n";

    const auto summary = read_rows("summary.csv");
    md << "## Per-consumer results (test split)\n\n";
    md << "| consumer | type | task | model | MAPE % | MAE kW | score MAPE % | score MAE % | MAPE thr % | MAE thr kW | "
          "target % | pass |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (std::size_t i = 1; i < summary.size(); ++i) {
        const auto& r = summary[i];
        if (r.size() < 16) continue;
        md << "| " << r[0] << " | " << r[2] << " | " << r[3] << " | " << r[4] << " | " << fixed(r[6], 2) << " | "
           << fixed(r[7], 3) << " | " << fixed(r[8], 1) << " | " << fixed(r[9], 1) << " | " << fixed(r[10], 0) << " | "
           << fixed(r[11], 3) << " | " << fixed(r[12], 0) << " | " << (r[15] == "1" ? "yes" : "no") << " |\n";
    }

    const auto comparison = read_rows("comparison.csv");
    md << "\n## Strategy against single model\n\n";
    md << "| consumer | task | model | MAPE single | score single | MAPE strategy | score strategy | delta MAPE |\n";
    md << "|---|---|---|---|---|---|---|---|\n";
    for (std::size_t i = 1; i < comparison.size(); ++i) {
        const auto& r = comparison[i];
        if (r.size() < 18) continue;
        md << "| " << r[0] << " | " << r[1] << " | " << r[3] << " | " << fixed(r[5], 2) << " | " << fixed(r[6], 1) << " | "
           << fixed(r[7], 2) << " | " << fixed(r[8], 1) << " | " << fixed(r[9], 2) << " |\n";
    }

    if (fs::exists(out_dir / "errors.csv")) {
        const auto errs = read_rows("errors.csv");
        if (errs.size() > 1) {
            md << "\n## Errors\n\n";
            for (std::size_t i = 1; i < errs.size(); ++i) {
                const auto& r = errs[i];
                md << "- " << (r.size() > 0 ? r[0] : "") << " at " << (r.size() > 1 ? r[1] : "") << ": "
                   << (r.size() > 3 ? r[3] : "") << "\n";
            }
        }
    }
    md << "\nPlots: consumers/<id>/<task>/mape_<model>.svg\n";
    return md.str();
}

} // namespace loadfc
