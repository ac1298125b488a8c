#include "loadfc/features.hpp"
#include "loadfc/rng.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace loadfc;
using namespace testing_support;
using namespace std::chrono;

namespace {

AlignedTable hourly_table(std::size_t days_count, std::uint64_t seed = 1) {
    Rng rng(seed);
    const Timestamp start = ts("2021-03-01T00:00");
    const auto load = make_series("c", start, Cadence::Hour, days_count * 24, [&](auto, const CivilTime& c) {
        return 50.0 + 10.0 * c.hour / 23.0 + rng.uniform(0.0, 2.0);
    });
    const HolidayCalendar cal({2021y / 4 / 2});
    return align_covariates(load, make_weather("z", start, days_count * 24), cal, std::nullopt);
}

} // namespace

TEST(Standardize, AffineMapOntoUnitInterval) {
    const Range r{0.0, 40.0};
    EXPECT_DOUBLE_EQ(standardize(r, 20.0), 0.0);
    EXPECT_DOUBLE_EQ(standardize(r, 40.0), 1.0);
    EXPECT_DOUBLE_EQ(standardize(r, 0.0), -1.0);
    EXPECT_DOUBLE_EQ(standardize(r, 50.0), 1.5);
    const std::vector<double> v{0.0, 10.0, 50.0};
    const auto out = standardize_weather(r, v);
    EXPECT_DOUBLE_EQ(out[1], -0.5);
    try {
        standardize_weather({5.0, 5.0}, v);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Standardization);
    }
    const std::vector<double> flat(10, 3.0);
    EXPECT_THROW(fit_range(flat), Error);
}

TEST(BuildMatrix, CategoricalHourCodes) {
    const auto t = hourly_table(10);
    FeatureSpec spec;
    spec.features.push_back({"hour", FeatureKind::Hour, Encoding::Categorical, 0, {}});
    const auto m = build_matrix(t, spec, 24);
    ASSERT_EQ(m.cols(), 1u);
    EXPECT_EQ(m.categories[0], 24);
    std::set<double> seen;
    for (std::size_t r = 0; r < m.rows(); ++r) seen.insert(m.at(r, 0));
    EXPECT_EQ(seen.size(), 24u);
    EXPECT_EQ(*seen.begin(), 0.0);
    EXPECT_EQ(*seen.rbegin(), 23.0);
}

TEST(BuildMatrix, OneHotRowsSumToOne) {
    const auto t = hourly_table(10);
    FeatureSpec spec;
    spec.features.push_back({"hour", FeatureKind::Hour, Encoding::OneHot, 0, {}});
    spec.features.push_back({"weekday", FeatureKind::Weekday, Encoding::OneHot, 0, {}});
    const auto m = build_matrix(t, spec, 24);
    ASSERT_EQ(m.cols(), 31u);
    EXPECT_EQ(m.columns[0], "hour=0");
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double hour_sum = 0, wd_sum = 0;
        for (std::size_t c = 0; c < 24; ++c) hour_sum += m.at(r, c);
        for (std::size_t c = 24; c < 31; ++c) wd_sum += m.at(r, c);
        ASSERT_EQ(hour_sum, 1.0);
        ASSERT_EQ(wd_sum, 1.0);
        ASSERT_EQ(m.at(r, static_cast<std::size_t>(t.hour[m.source_rows[r]])), 1.0);
    }
}

TEST(BuildMatrix, LagColumnsMatchDirectTimestampLookup) {
    const auto t = hourly_table(14);
    const auto m = build_matrix(t, lag_spec(Task::DayAhead), 24);
    std::map<Timestamp, double> by_time;
    for (std::size_t i = 0; i < t.size(); ++i) by_time[t.timestamps[i]] = t.target[i];
    EXPECT_EQ(m.rows(), t.size() - 168);
    const auto c24 = *m.column_index("lag_24");
    const auto c168 = *m.column_index("lag_168");
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const Timestamp at = m.timestamps[r];
        ASSERT_EQ(m.at(r, c24), by_time.at(at - hours{24}));
        ASSERT_EQ(m.at(r, c168), by_time.at(at - hours{168}));
        ASSERT_EQ(m.target[r], by_time.at(at));
    }
}

TEST(BuildMatrix, NoLagShorterThanHorizon) {
    const auto t = hourly_table(10);
    FeatureSpec spec;
    spec.features.push_back(lag_feature(1));
    try {
        build_matrix(t, spec, 24);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
    for (Task task : {Task::DayAhead, Task::QuarterHour})
        for (auto lag : default_lags(task)) EXPECT_GE(lag, task_horizon(task));
}

TEST(BuildMatrix, LagBeyondHistoryIsEmpty) {
    const auto t = hourly_table(5);
    FeatureSpec spec;
    spec.features.push_back(lag_feature(168));
    try {
        build_matrix(t, spec, 24);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyMatrix);
    }
}

TEST(BuildMatrix, RowsWithMissingLagsAreDropped) {
    auto t = hourly_table(10);
    t.target[100] = std::nan("");
    FeatureSpec spec;
    spec.features.push_back(lag_feature(24));
    const auto m = build_matrix(t, spec, 24);
    // row 100 loses its target, row 124 loses its lag
    EXPECT_EQ(m.rows(), t.size() - 24 - 2);
    for (auto r : m.source_rows) EXPECT_TRUE(r != 100 && r != 124);
    BuildOptions keep;
    keep.keep_missing_target = true;
    EXPECT_EQ(build_matrix(t, spec, 24, keep).rows(), t.size() - 24 - 1);
}

TEST(BuildMatrix, WeatherUsesSuppliedTrainingScaling) {
    const auto t = hourly_table(10);
    FeatureSpec spec;
    spec.features.push_back({"temperature", FeatureKind::Temperature, Encoding::Standardized, 0, {}});
    BuildOptions opts;
    opts.scaling = WeatherScaling{{0.0, 40.0}, {0.0, 100.0}};
    const auto m = build_matrix(t, spec, 24, opts);
    for (std::size_t r = 0; r < m.rows(); ++r)
        ASSERT_DOUBLE_EQ(m.at(r, 0), t.temperature[m.source_rows[r]] / 20.0 - 1.0);
}

TEST(FeatureSpecTest, ValidationAndCandidates) {
    FeatureSpec dup;
    dup.features = {lag_feature(24), lag_feature(24)};
    EXPECT_THROW(dup.validate(), Error);
    FeatureSpec bad_enc;
    bad_enc.features.push_back({"hour", FeatureKind::Hour, Encoding::Raw, 0, {}});
    EXPECT_THROW(bad_enc.validate(), Error);

    auto names = [](const std::vector<FeatureDescriptor>& c) {
        std::vector<std::string> n;
        for (const auto& d : c) n.push_back(d.name);
        return n;
    };
    const auto ind = names(covariate_candidates(ConsumerType::Industrial));
    const auto res = names(covariate_candidates(ConsumerType::Residential));
    EXPECT_EQ(std::count_if(ind.begin(), ind.end(), [](auto& s) { return s.rfind("socio_", 0) == 0; }), 0);
    EXPECT_EQ(std::count_if(res.begin(), res.end(), [](auto& s) { return s.rfind("socio_", 0) == 0; }), 4);
    EXPECT_EQ(default_lags(Task::DayAhead), (std::vector<std::size_t>{24, 25, 48, 168}));
    EXPECT_EQ(default_lags(Task::QuarterHour), (std::vector<std::size_t>{1, 2, 3, 4, 96, 672}));
}

TEST(BuildMatrix, SocioFeatureNeedsRecord) {
    auto t = hourly_table(3);
    FeatureSpec spec;
    spec.features.push_back({"socio_tsi", FeatureKind::SocioStatic, Encoding::Raw, 0, "tsi"});
    EXPECT_THROW(build_matrix(t, spec, 24), Error);
    t.socio = SocioEconomicRecord{"z", 1000, 10, 97.5, 12000};
    const auto m = build_matrix(t, spec, 24);
    EXPECT_EQ(m.at(0, 0), 97.5);
}
