// loadfc: command-line front end over the header-only library.

#include "loadfc/pipeline.hpp"
#include "loadfc/synth.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace loadfc;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::string out;
};

RunConfig resolve_config(const Globals& g) {
    if (g.config.empty()) throw Error(ErrorKind::Config, "--config is required for this command");
    auto cfg = load_run_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (g.jobs) cfg.jobs = *g.jobs;
    if (!g.out.empty()) cfg.output = g.out;
    return cfg;
}

std::string task_slug(Task t) { return std::string(to_string(t)); }

nlohmann::json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + p.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, p.string() + ": " + e.what());
    }
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
    out << text;
}

// features for train/tune: explicit spec file, else selection or defaults per config
FeatureSpec features_for(const RunContext& ctx, const AlignedTable& table, ConsumerType type, Task task,
                         const std::string& spec_file) {
    if (!spec_file.empty()) {
        const auto j = read_json_file(spec_file);
        return feature_spec_from_json(j.contains("selected") ? j.at("selected") : j);
    }
    if (!ctx.config.select_features) return default_feature_spec(type, task);
    return select_for(ctx, table, type, task).selected;
}

int cmd_synth(const Globals& g, FleetConfig fc, long cadence_min) {
    if (g.seed) fc.seed = *g.seed;
    if (g.jobs) fc.jobs = *g.jobs;
    fc.cadence = cadence_from_minutes(cadence_min);
    const fs::path dir = g.out.empty() ? fs::path("synth") : fs::path(g.out);
    const auto fleet = generate_fleet(fc);
    write_fleet(fleet, dir);
    nlohmann::json cfg = {{"paths", {{"data", "."}, {"output", "out"}}},
                          {"seed", fc.seed},
                          {"tasks", fc.cadence == Cadence::QuarterHour ? nlohmann::json{"day-ahead", "15-min"}
                                                                       : nlohmann::json{"day-ahead"}}};
    write_file(dir / "config.json", cfg.dump(2) + "\n");
    std::cout << "wrote " << fleet.records.size() << " consumers to " << dir.string() << "\n";
    return 0;
}

int cmd_classify(const Globals& g, const std::string& confusion_path) {
    const auto ctx = make_context(resolve_config(g));
    ConfusionMatrix cm;
    std::size_t labelled = 0;
    std::cout << "consumer_id,declared,predicted,rule\n";
    for (const auto& e : ctx.entries) {
        const auto c = classify_consumer(ctx, load_consumer(ctx, e));
        std::string declared;
        if (auto it = ctx.labels.find(e.consumer_id); it != ctx.labels.end()) {
            declared = to_string(it->second);
            cm.add(it->second, c.type);
            ++labelled;
        }
        std::cout << e.consumer_id << ',' << declared << ',' << to_string(c.type) << ',' << to_string(c.rule) << '\n';
    }
    if (!confusion_path.empty()) {
        if (labelled == 0) throw Error(ErrorKind::Config, "--confusion needs a labels file in the config");
        std::ostringstream os;
        cm.write_csv(os);
        write_file(confusion_path, os.str());
        std::fprintf(stderr, "accuracy %.4f over %zu labelled consumers\n", cm.accuracy(), labelled);
    }
    return 0;
}

int cmd_select(const Globals& g, const std::string& consumer, const std::string& task_name) {
    const auto ctx = make_context(resolve_config(g));
    const auto task = task_from_string(task_name);
    const auto& entry = ctx.entry(consumer);
    const auto load = load_consumer(ctx, entry);
    const auto type = classify_consumer(ctx, load).type;
    const auto table = consumer_table(ctx, entry, load, task);
    const auto rep = select_for(ctx, table, type, task);
    const fs::path dir = ctx.config.output;
    std::ostringstream csv;
    write_ablation_csv(csv, rep);
    write_file(dir / ("selection_" + consumer + "_" + task_slug(task) + ".csv"), csv.str());
    write_file(dir / ("selection_" + consumer + "_" + task_slug(task) + ".json"), ablation_to_json(rep).dump(2) + "\n");
    std::cout << "kept:";
    for (const auto& k : rep.kept) std::cout << ' ' << k;
    std::cout << "\n";
    return 0;
}

int cmd_tune(const Globals& g, const std::string& consumer, const std::string& task_name, std::size_t budget,
             const std::string& spec_file, const std::string& space_file) {
    const auto ctx = make_context(resolve_config(g));
    const auto task = task_from_string(task_name);
    const auto& entry = ctx.entry(consumer);
    const auto load = load_consumer(ctx, entry);
    const auto type = classify_consumer(ctx, load).type;
    const auto table = consumer_table(ctx, entry, load, task);
    const auto spec = features_for(ctx, table, type, task, spec_file);
    const auto space = space_file.empty() ? default_gbdt_space() : space_from_json(read_json_file(space_file));
    if (budget == 0) budget = ctx.config.tuner_budget > 0 ? ctx.config.tuner_budget : 30;
    const auto tr = tune_for(ctx, table, spec, task, budget, space);
    const auto params = apply_assignment(space, tr.best.x, ctx.config.params);
    const fs::path dir = ctx.config.output;
    std::ostringstream csv;
    write_trials_csv(csv, space, tr.history);
    write_file(dir / ("trials_" + consumer + "_" + task_slug(task) + ".csv"), csv.str());
    write_file(dir / ("params_" + consumer + "_" + task_slug(task) + ".json"), params_to_json(params).dump(2) + "\n");
    std::printf("best validation MAPE %.4f after %zu trials\n", tr.best.objective, tr.history.size());
    return 0;
}

int cmd_train(const Globals& g, const std::string& consumer, const std::string& task_name, const std::string& spec_file,
              const std::string& params_file, const std::string& strategy, const std::string& holiday_def) {
    const auto ctx = make_context(resolve_config(g));
    const auto task = task_from_string(task_name);
    const auto& entry = ctx.entry(consumer);
    const auto load = load_consumer(ctx, entry);
    const auto type = classify_consumer(ctx, load).type;
    const auto table = consumer_table(ctx, entry, load, task);
    const auto spec = features_for(ctx, table, type, task, spec_file);
    GBDTParams params = ctx.config.params;
    if (!params_file.empty()) params = params_from_json(read_json_file(params_file), params);
    auto opts = train_options(ctx, consumer, type, task, params);
    if (!strategy.empty()) opts.strategy = strategy_from_string(strategy);
    if (!holiday_def.empty()) opts.holiday_definition = holiday_definition_from_string(holiday_def);
    // production model: every available row
    const auto model = detail::staged(consumer, "train",
                                      [&] { return train_strategy(table, table.size(), spec, task, ctx.calendar, opts); });
    const auto text = trained_to_json(model).dump();
    const fs::path path = ctx.config.output / ("model_" + consumer + "_" + task_slug(task) + ".json");
    write_file(path, text + "\n");
    std::cout << path.string() << " " << model_fingerprint(text) << "\n";
    return 0;
}

int cmd_forecast(const Globals& g, const std::string& model_path, const std::string& issued) {
    const auto ctx = make_context(resolve_config(g));
    const auto model = trained_from_json(read_json_file(model_path));
    const auto& entry = ctx.entry(model.consumer_id);
    const auto load = load_consumer(ctx, entry);
    const std::size_t h = task_horizon(model.task);
    const auto table = consumer_table(ctx, entry, load, model.task, h);
    Timestamp issued_at = table.timestamps[table.size() - h - 1];
    if (!issued.empty()) {
        const auto t = parse_timestamp(issued);
        if (!t) throw Error(ErrorKind::Parse, "bad --issued-at '" + issued + "'");
        issued_at = *t;
    }
    const auto f = detail::staged(model.consumer_id, "forecast",
                                  [&] { return issue_forecast(model, table, ctx.calendar, issued_at); });
    std::ostringstream os;
    write_forecast_csv(os, f);
    const fs::path path = ctx.config.output / ("forecast_" + model.consumer_id + "_" + task_slug(model.task) + ".csv");
    write_file(path, os.str());
    std::cout << path.string() << "\n";
    return 0;
}

int cmd_evaluate(const Globals& g, const std::string& consumer, const std::string& task_name) {
    auto cfg = resolve_config(g);
    if (!task_name.empty()) cfg.tasks = {task_from_string(task_name)};
    const auto ctx = make_context(cfg);
    const auto r = run_consumer(ctx, ctx.entry(consumer));
    if (r.error_stage) throw StageError(Error(*r.error_kind, r.error), consumer, *r.error_stage);
    for (const auto& t : r.tasks) {
        std::printf("%s %s %s: single MAPE %.3f%% score %.1f%% | %s MAPE %.3f%% score %.1f%% | baseline MAPE %.3f%% | %s\n",
                    consumer.c_str(), std::string(to_string(r.type)).c_str(), task_slug(t.task).c_str(),
                    t.single.aggregate_mape, t.single.score_mape, std::string(to_string(t.strategy)).c_str(),
                    t.deployed.aggregate_mape, t.deployed.score_mape, t.baseline.aggregate_mape,
                    t.deployed.passed() ? "pass" : "miss");
    }
    return r.passed() ? 0 : 2;
}

int cmd_aggregate(const Globals& g, const std::vector<std::string>& files) {
    const auto ctx = make_context(resolve_config(g));
    std::map<std::string, std::map<std::string, std::vector<ConsumerForecast>>> by_task;
    for (const auto& f : files) {
        const auto a = read_forecast_csv(f);
        const auto& e = ctx.entry(a.consumer_id);
        by_task[task_slug(a.task)][e.location].push_back({a.consumer_id, e.location, a.timestamps, a.kw});
    }
    for (const auto& [task, locs] : by_task)
        for (const auto& [loc, fcs] : locs) {
            const auto agg = aggregate_forecasts(fcs).front();
            std::ostringstream os;
            os << "timestamp,kw\n";
            for (std::size_t i = 0; i < agg.timestamps.size(); ++i)
                os << format_timestamp(agg.timestamps[i]) << ',' << format_double(agg.values[i]) << '\n';
            const fs::path path = ctx.config.output / "aggregate" / task / (loc + ".csv");
            write_file(path, os.str());
            std::cout << path.string() << " (" << fcs.size() << " consumers)\n";
        }
    return 0;
}

int cmd_report(const Globals& g) {
    fs::path dir = g.out;
    if (dir.empty()) dir = resolve_config(g).output;
    const auto md = render_report(dir);
    write_file(dir / "report.md", md);
    std::cout << (dir / "report.md").string() << "\n";
    return 0;
}

int cmd_run(const Globals& g) {
    const auto cfg = resolve_config(g);
    const auto run = run_pipeline(cfg);
    write_file(cfg.output / "report.md", render_report(cfg.output));
    std::size_t failed = 0, errors = 0;
    for (const auto& c : run.consumers) {
        if (c.error_stage) {
            ++errors;
            std::fprintf(stderr, "error: consumer %s, stage %s: %s\n", c.consumer_id.c_str(), c.error_stage->c_str(),
                         c.error.c_str());
        } else if (!c.passed()) {
            ++failed;
        }
    }
    for (const auto& e : run.errors) std::fprintf(stderr, "error: %s\n", e.c_str());
    std::printf("%zu consumers, %zu missed targets, %zu errors; exit %d\n", run.consumers.size(), failed, errors,
                run.exit_code);
    return run.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"loadfc: consumer classification and short-term load forecasting"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "run configuration (JSON)");
    app.add_option("--seed", g.seed, "master seed, overrides the config");
    app.add_option("--jobs", g.jobs, "parallel consumers");
    app.add_option("--out", g.out, "output directory");

    FleetConfig fleet;
    long cadence_min = 15;
    auto* synth = app.add_subcommand("synth", "generate a labelled synthetic corpus");
    synth->add_option("--industrial", fleet.industrial);
    synth->add_option("--commercial", fleet.commercial);
    synth->add_option("--residential", fleet.residential);
    synth->add_option("--weeks", fleet.weeks);
    synth->add_option("--cadence-min", cadence_min)->check(CLI::IsMember({15L, 60L}));
    synth->add_option("--per-location", fleet.consumers_per_location);

    std::string confusion;
    auto* classify = app.add_subcommand("classify", "rule-based consumer typing");
    classify->add_option("--confusion", confusion, "write the confusion matrix against the labels");

    std::string consumer, task = "day-ahead", spec_file, params_file, space_file, strategy, holiday_def, model, issued;
    std::size_t budget = 0;
    auto* features = app.add_subcommand("features", "feature engineering");
    features->require_subcommand(1);
    auto* select = features->add_subcommand("select", "ablation-based feature selection");
    select->add_option("--consumer", consumer)->required();
    select->add_option("--task", task);

    auto* tune = app.add_subcommand("tune", "TPE search over GBDT hyperparameters");
    tune->add_option("--consumer", consumer)->required();
    tune->add_option("--task", task);
    tune->add_option("--budget", budget);
    tune->add_option("--features", spec_file, "feature spec JSON");
    tune->add_option("--space", space_file, "search space JSON");

    auto* train = app.add_subcommand("train", "fit a model on all available data");
    train->add_option("--consumer", consumer)->required();
    train->add_option("--task", task);
    train->add_option("--features", spec_file, "feature spec JSON");
    train->add_option("--params", params_file, "GBDT parameters JSON");
    train->add_option("--strategy", strategy)->check(CLI::IsMember({"single", "fusion", "hybrid"}));
    train->add_option("--holiday-def", holiday_def)->check(CLI::IsMember({"ph", "ph+we"}));

    auto* forecast = app.add_subcommand("forecast", "issue a forecast from a trained model");
    forecast->add_option("--model", model)->required();
    forecast->add_option("--issued-at", issued, "ISO-8601 UTC; defaults to the last observation");

    auto* evaluate = app.add_subcommand("evaluate", "rolling-origin evaluation of one consumer");
    evaluate->add_option("--consumer", consumer)->required();
    evaluate->add_option("--task", task);

    std::vector<std::string> forecast_files;
    auto* aggregate = app.add_subcommand("aggregate", "sum forecasts per location");
    aggregate->add_option("forecasts", forecast_files)->required();

    auto* report = app.add_subcommand("report", "write report.md for a finished run");
    auto* run = app.add_subcommand("run", "end-to-end pipeline");

    CLI11_PARSE(app, argc, argv);
    const bool task_given = evaluate->count("--task") > 0;

    try {
        if (synth->parsed()) return cmd_synth(g, fleet, cadence_min);
        if (classify->parsed()) return cmd_classify(g, confusion);
        if (select->parsed()) return cmd_select(g, consumer, task);
        if (tune->parsed()) return cmd_tune(g, consumer, task, budget, spec_file, space_file);
        if (train->parsed()) return cmd_train(g, consumer, task, spec_file, params_file, strategy, holiday_def);
        if (forecast->parsed()) return cmd_forecast(g, model, issued);
        if (evaluate->parsed()) return cmd_evaluate(g, consumer, task_given ? task : std::string());
        if (aggregate->parsed()) return cmd_aggregate(g, forecast_files);
        if (report->parsed()) return cmd_report(g);
        if (run->parsed()) return cmd_run(g);
    } catch (const StageError& e) {
        std::fprintf(stderr, "error: consumer %s, stage %s: %s\n", e.consumer_id().c_str(), e.stage().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
