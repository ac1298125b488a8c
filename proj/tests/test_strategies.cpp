#include "loadfc/strategies.hpp"
#include "loadfc/synth.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace loadfc;
using namespace testing_support;
using namespace std::chrono;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorKind::Io;
}

// hourly rows from `start`; column "x" uniform, "hour" the UTC hour
FeatureMatrix hourly_matrix(Timestamp start, std::size_t rows, const std::function<double(Timestamp, double)>& y,
                            std::uint64_t seed = 1) {
    Rng rng(seed);
    FeatureMatrix m;
    m.columns = {"x", "hour"};
    m.categories = {0, 0};
    for (std::size_t r = 0; r < rows; ++r) {
        const Timestamp t = start + Duration{3600} * static_cast<long>(r);
        const double x = rng.uniform(0, 1);
        m.timestamps.push_back(t);
        m.source_rows.push_back(r);
        m.data.push_back(x);
        m.data.push_back(static_cast<double>((t.time_since_epoch().count() / 3600) % 24));
        m.target.push_back(y(t, x));
    }
    return m;
}

HolidayCalendar easter_2021() { return spanish_holidays(2021, 2021); }

GBDTParams small_params() {
    GBDTParams p;
    p.n_trees = 30;
    p.min_samples_leaf = 5;
    return p;
}

std::vector<double> column_of(const std::vector<LocationForecast>& v, std::size_t i) { return v.at(i).values; }

} // namespace

TEST(Defaults, PerTypeChoices) {
    EXPECT_EQ(default_strategy(ConsumerType::Industrial), Strategy::Fusion);
    EXPECT_EQ(default_strategy(ConsumerType::Commercial), Strategy::Fusion);
    EXPECT_EQ(default_strategy(ConsumerType::Residential), Strategy::Hybrid);
    EXPECT_EQ(default_holiday_definition(ConsumerType::Industrial), HolidayDefinition::PublicHolidaysAndWeekends);
    EXPECT_EQ(default_holiday_definition(ConsumerType::Commercial), HolidayDefinition::PublicHolidays);
    EXPECT_EQ(strategy_from_string("hybrid"), Strategy::Hybrid);
    EXPECT_EQ(kind_of([] { strategy_from_string("stacked"); }), ErrorKind::Config);
}

TEST(Fusion, NoHolidaysIsPartitionError) {
    HolidayCalendar none;
    none.set_coverage(year{2021} / 1 / 1, year{2021} / 12 / 31);
    // Wednesday to Friday: no weekend either
    const auto m = hourly_matrix(ts("2021-03-02T23:00"), 72, [](Timestamp, double x) { return x; });
    EXPECT_EQ(kind_of([&] { fit_fusion(m, none, small_params(), HolidayDefinition::PublicHolidays, {}); }),
              ErrorKind::Partition);
    try {
        fit_fusion(m, none, small_params(), HolidayDefinition::PublicHolidays, {});
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("ph+we"), std::string::npos);
    }
}

TEST(Fusion, ConstantPartitionsPredictedExactly) {
    const auto cal = easter_2021();
    const auto def = HolidayDefinition::PublicHolidaysAndWeekends;
    // four weeks from Monday 2021-03-01 local midnight
    const auto m = hourly_matrix(ts("2021-02-28T23:00"), 28 * 24,
                                 [&](Timestamp t, double) { return cal.is_holiday(t, def) ? 5.0 : 100.0; });
    const auto f = fit_fusion(m, cal, small_params(), def, {});
    const auto pred = predict_fusion(f, m, cal);
    for (std::size_t r = 0; r < m.rows(); ++r) EXPECT_EQ(pred[r], m.target[r]) << format_timestamp(m.timestamps[r]);
}

TEST(Fusion, StitchOfSubmodelsAndRoutingPartition) {
    const auto cal = easter_2021();
    const auto def = HolidayDefinition::PublicHolidays;
    auto y = [&](Timestamp t, double x) { return cal.is_holiday(t, def) ? 3.0 + x : 50.0 + 10.0 * x; };
    const auto train = hourly_matrix(ts("2021-02-28T23:00"), 60 * 24, y, 2);
    FusionOptions opts;
    opts.min_rows = 20;
    const auto f = fit_fusion(train, cal, small_params(), def, {}, opts);
    ASSERT_TRUE(f.holiday_model && f.workday_model);

    // 48 h span across Maundy Thursday / Good Friday
    const auto span = hourly_matrix(ts("2021-03-31T22:00"), 48, y, 3);
    const auto stitched = predict_fusion(f, span, cal);
    const auto wd = predict_ensemble(*f.workday_model, span);
    const auto hd = predict_ensemble(*f.holiday_model, span);
    const auto routes = holiday_routes(cal, span.timestamps, def);
    std::size_t n_hol = 0, n_work = 0;
    for (std::size_t r = 0; r < span.rows(); ++r) {
        EXPECT_EQ(stitched[r], routes[r] ? hd[r] : wd[r]);
        (routes[r] ? n_hol : n_work) += 1;
    }
    EXPECT_EQ(n_hol, 24u); // Good Friday, local day
    EXPECT_EQ(n_hol + n_work, span.rows());
}

TEST(Fusion, GoodFridayServedByHolidayModel) {
    const auto cal = easter_2021();
    const auto def = HolidayDefinition::PublicHolidays;
    const auto train = hourly_matrix(ts("2021-02-28T23:00"), 60 * 24,
                                     [&](Timestamp t, double) { return cal.is_holiday(t, def) ? 7.0 : 70.0; });
    FusionOptions opts;
    opts.min_rows = 20;
    const auto f = fit_fusion(train, cal, small_params(), def, {}, opts);
    // Friday 2021-04-02 in Madrid (UTC+2 after the March switch)
    const auto day = hourly_matrix(ts("2021-04-01T22:00"), 24, [](Timestamp, double) { return 0.0; });
    for (double v : predict_fusion(f, day, cal)) EXPECT_EQ(v, 7.0);
    const auto thursday = hourly_matrix(ts("2021-03-31T22:00"), 24, [](Timestamp, double) { return 0.0; });
    for (double v : predict_fusion(f, thursday, cal)) EXPECT_EQ(v, 70.0);
}

TEST(Fusion, ConstantFlagEqualsSingleModel) {
    HolidayCalendar none;
    none.set_coverage(year{2021} / 1 / 1, year{2021} / 12 / 31);
    const auto m = hourly_matrix(ts("2021-03-02T23:00"), 500, [](Timestamp, double x) { return 10.0 + std::sin(6 * x); });
    FusionOptions opts;
    opts.min_rows = 0;
    const auto params = small_params();
    const auto f = fit_fusion(m, none, params, HolidayDefinition::PublicHolidays, {}, opts);
    EXPECT_FALSE(f.holiday_model);
    const auto single = fit_ensemble(params, EnsembleMode::Boosted, m);
    EXPECT_EQ(predict_fusion(f, m, none), predict_ensemble(single, m));
}

TEST(Fusion, OutsideCalendarCoverage) {
    const auto cal = easter_2021();
    const auto m = hourly_matrix(ts("2023-05-01T00:00"), 10, [](Timestamp, double x) { return x; });
    EXPECT_EQ(kind_of([&] { holiday_routes(cal, m.timestamps, HolidayDefinition::PublicHolidays); }), ErrorKind::Calendar);
}

TEST(Fusion, SyntheticIndustrialHolidayModelRunsLower) {
    const auto cal = easter_2021();
    auto cfg = SynthConfig::defaults(ConsumerType::Industrial);
    cfg.cadence = Cadence::Hour;
    cfg.weeks = 10;
    const auto weather = synth_weather("z", cfg.start, cfg.weeks * 7 * 24, 1);
    const auto rec = generate(cfg, cal, weather);
    const auto table = align_covariates(rec.load, weather, cal, std::nullopt);
    const auto spec = default_feature_spec(ConsumerType::Industrial, Task::DayAhead);
    const auto m = build_matrix(table, spec, 24);
    const auto f = fit_fusion(m, cal, small_params(), HolidayDefinition::PublicHolidaysAndWeekends, spec);
    const auto hol = predict_ensemble(*f.holiday_model, m);
    const auto work = predict_ensemble(*f.workday_model, m);
    const double mh = std::accumulate(hol.begin(), hol.end(), 0.0) / static_cast<double>(hol.size());
    const double mw = std::accumulate(work.begin(), work.end(), 0.0) / static_cast<double>(work.size());
    EXPECT_LT(mh, mw);
}

TEST(Hybrid, TargetEqualToBaselineIsLearned) {
    // daily periodic load: the residential day baseline reproduces it exactly
    const auto cal = easter_2021();
    // (UTC hours, so the spring clock change does not break the periodicity)
    const auto load = make_series("r", ts("2021-01-31T23:00"), Cadence::Hour, 8 * 7 * 24, [](Timestamp t, const CivilTime&) {
        const auto h = static_cast<double>((t.time_since_epoch().count() / 3600) % 24);
        return 1.0 + 0.5 * std::sin(h * 0.2618) + (h >= 18 && h < 22 ? 1.5 : 0.0);
    });
    const auto weather = make_weather("z", load.start(), load.size());
    const auto table = align_covariates(load, weather, cal, std::nullopt);
    TrainOptions opts;
    opts.strategy = Strategy::Hybrid;
    opts.baseline = default_baseline(Task::DayAhead);
    opts.params.min_samples_leaf = 5; // default 200 trees: shrinkage has run its course
    const std::size_t cut = table.size() * 3 / 4;
    const auto model = train_strategy(table, cut, lag_spec(Task::DayAhead), Task::DayAhead, cal, opts);
    const auto pred = predict_strategy(model, table, cal);
    std::vector<double> a, p;
    for (std::size_t i = cut; i < table.size(); ++i) a.push_back(table.target[i]), p.push_back(pred[i]);
    EXPECT_LT(mape(a, p), 1.0);
}

TEST(Hybrid, ConstantBaselineEqualsPlainCore) {
    const auto m = hourly_matrix(ts("2021-03-02T23:00"), 400, [](Timestamp, double x) { return 2.0 + x * x; });
    FeatureMatrix with = m;
    with.columns.push_back(kBaselineColumn);
    with.categories.push_back(0);
    with.data.clear();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        with.data.insert(with.data.end(), row.begin(), row.end());
        with.data.push_back(4.2);
    }
    const auto params = small_params();
    const auto h = fit_hybrid(with, params, default_baseline(Task::DayAhead), {});
    const auto plain = fit_ensemble(params, EnsembleMode::Boosted, m);
    EXPECT_EQ(predict_hybrid(h, with), predict_ensemble(plain, m));
}

TEST(Hybrid, SchemaAndHorizonGuards) {
    const auto m = hourly_matrix(ts("2021-03-02T23:00"), 50, [](Timestamp, double x) { return x; });
    EXPECT_EQ(kind_of([&] { fit_hybrid(m, small_params(), {}, {}); }), ErrorKind::Schema);

    const auto cal = easter_2021();
    const auto load = make_series("r", ts("2021-01-31T23:00"), Cadence::Hour, 400,
                                  [](Timestamp, const CivilTime& c) { return 1.0 + c.hour; });
    const auto table = align_covariates(load, make_weather("z", load.start(), load.size()), cal, std::nullopt);
    BaselineParams last;
    last.kind = BaselineKind::PersistLastStep;
    EXPECT_EQ(kind_of([&] { with_baseline_column(table, last, 24); }), ErrorKind::Horizon);
    EXPECT_NO_THROW(with_baseline_column(table, last, 1));
}

TEST(Aggregate, HandExamples) {
    const std::vector<Timestamp> t3{ts("2021-05-01T00:00"), ts("2021-05-01T01:00"), ts("2021-05-01T02:00")};
    const auto two = aggregate_forecasts({{"a", "L", t3, {1, 2, 3}}, {"b", "L", t3, {4, 5, 6}}});
    ASSERT_EQ(two.size(), 1u);
    EXPECT_EQ(two[0].values, (std::vector<double>{5, 7, 9}));
    EXPECT_EQ(two[0].consumers, (std::vector<std::string>{"a", "b"}));

    const auto one = aggregate_forecasts({{"a", "L", t3, {1.5, 2.5, 3.5}}});
    EXPECT_EQ(one[0].values, (std::vector<double>{1.5, 2.5, 3.5}));

    // hand grouping: L2 = c, L1 = a + b
    const auto three =
        aggregate_forecasts({{"c", "L2", t3, {10, 20, 30}}, {"a", "L1", t3, {1, 1, 1}}, {"b", "L1", t3, {2, 0, 5}}});
    ASSERT_EQ(three.size(), 2u);
    EXPECT_EQ(three[0].location, "L1");
    EXPECT_EQ(column_of(three, 0), (std::vector<double>{3, 1, 6}));
    EXPECT_EQ(three[1].location, "L2");
    EXPECT_EQ(column_of(three, 1), (std::vector<double>{10, 20, 30}));
}

TEST(Aggregate, LinearityAndAlignment) {
    Rng rng(8);
    const std::vector<Timestamp> t{ts("2021-05-01T00:00"), ts("2021-05-01T00:15"), ts("2021-05-01T00:30")};
    std::vector<double> f1(3), f2(3);
    for (auto& v : f1) v = rng.uniform(0, 10);
    for (auto& v : f2) v = rng.uniform(0, 10);
    for (double k : {0.5, 2.0, 8.0}) {
        auto k1 = f1, k2 = f2;
        for (auto& v : k1) v *= k;
        for (auto& v : k2) v *= k;
        const auto scaled = aggregate_forecasts({{"a", "L", t, k1}, {"b", "L", t, k2}})[0].values;
        const auto base = aggregate_forecasts({{"a", "L", t, f1}, {"b", "L", t, f2}})[0].values;
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(scaled[i], k * base[i], 1e-12 * k * base[i]);
    }
    auto shifted = t;
    shifted[2] = ts("2021-05-01T00:45");
    EXPECT_EQ(kind_of([&] { aggregate_forecasts({{"a", "L", t, f1}, {"b", "L", shifted, f2}}); }), ErrorKind::Alignment);
    EXPECT_EQ(kind_of([&] { aggregate_forecasts({{"a", "L", t, {1.0}}}); }), ErrorKind::Alignment);
}

TEST(TrainedModelJson, RoundTripPerStrategy) {
    const auto cal = easter_2021();
    auto cfg = SynthConfig::defaults(ConsumerType::Commercial);
    cfg.cadence = Cadence::Hour;
    cfg.weeks = 8;
    const auto weather = synth_weather("z", cfg.start, cfg.weeks * 7 * 24, 4);
    const auto table = align_covariates(generate(cfg, cal, weather).load, weather, cal, std::nullopt);
    const auto spec = default_feature_spec(ConsumerType::Commercial, Task::DayAhead);
    for (auto s : {Strategy::Single, Strategy::Fusion, Strategy::Hybrid}) {
        TrainOptions o;
        o.strategy = s;
        o.holiday_definition = HolidayDefinition::PublicHolidaysAndWeekends;
        o.baseline = default_baseline(Task::DayAhead);
        o.params = small_params();
        const auto m = train_strategy(table, table.size() * 3 / 4, spec, Task::DayAhead, cal, o);
        const auto text = trained_to_json(m).dump();
        const auto back = trained_from_json(nlohmann::json::parse(text));
        EXPECT_EQ(trained_to_json(back).dump(), text) << to_string(s);
        const auto a = predict_strategy(m, table, cal), b = predict_strategy(back, table, cal);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::isnan(a[i])) EXPECT_TRUE(std::isnan(b[i]));
            else EXPECT_EQ(a[i], b[i]);
    }
}
