#include "loadfc/baselines.hpp"
#include "loadfc/evaluation.hpp"
#include "loadfc/rng.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace loadfc;
using namespace testing_support;

namespace {

std::vector<Timestamp> grid(std::size_t n, long step_s) {
    std::vector<Timestamp> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = ts("2021-05-03T00:00") + Duration{step_s} * static_cast<long>(i);
    return t;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorKind::Io;
}

} // namespace

TEST(Metrics, HandExamples) {
    EXPECT_DOUBLE_EQ(mape(std::vector<double>{100, 100}, std::vector<double>{90, 110}), 10.0);
    EXPECT_DOUBLE_EQ(mape(std::vector<double>{2, 4, 5}, std::vector<double>{1, 5, 5}), 25.0);
    EXPECT_EQ(mape(std::vector<double>{3, 7}, std::vector<double>{3, 7}), 0.0);
    EXPECT_DOUBLE_EQ(mae(std::vector<double>{2, 4}, std::vector<double>{1, 5}), 1.0);
    EXPECT_EQ(mae(std::vector<double>{2, 4}, std::vector<double>{2, 4}), 0.0);
    EXPECT_DOUBLE_EQ(quantitative_score(std::vector<double>{10, 25, 15}, 20.0), 200.0 / 3.0);
}

TEST(Metrics, Errors) {
    EXPECT_EQ(kind_of([] { mape(std::vector<double>{0, 1}, std::vector<double>{1, 1}); }), ErrorKind::Metric);
    EXPECT_EQ(kind_of([] { mae(std::vector<double>{1}, std::vector<double>{1, 1}); }), ErrorKind::Metric);
    EXPECT_EQ(kind_of([] { mae(std::vector<double>{}, std::vector<double>{}); }), ErrorKind::Metric);
}

TEST(Metrics, MaeIsHomogeneous) {
    Rng rng(2);
    std::vector<double> a(50), p(50);
    for (std::size_t i = 0; i < 50; ++i) a[i] = rng.uniform(1, 10), p[i] = rng.uniform(1, 10);
    for (double k : {0.5, 3.0, 1000.0}) {
        auto ka = a, kp = p;
        for (auto& x : ka) x *= k;
        for (auto& x : kp) x *= k;
        EXPECT_NEAR(mae(ka, kp), k * mae(a, p), 1e-12 * k * mae(a, p));
        EXPECT_NEAR(mape(ka, kp), mape(a, p), 1e-9);
    }
}

TEST(Metrics, ScoreMonotoneInThreshold) {
    Rng rng(3);
    std::vector<double> v(200);
    for (auto& x : v) x = rng.uniform(0, 50);
    double prev = -1;
    for (double thr = 0; thr <= 60; thr += 0.5) {
        const double s = quantitative_score(v, thr);
        EXPECT_GE(s, prev);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 100.0);
        prev = s;
    }
}

TEST(RollingDayAhead, WindowCountAndPerfectPredictor) {
    const auto t = grid(48, 3600);
    std::vector<double> actual(48);
    for (std::size_t i = 0; i < 48; ++i) actual[i] = 10.0 + static_cast<double>(i % 24);
    const auto rep = rolling_day_ahead("c", t, actual, actual, ThresholdPolicy{});
    EXPECT_EQ(rep.windows.size(), 25u);
    EXPECT_EQ(rep.score_mape, 100.0);
    EXPECT_EQ(rep.score_mae, 100.0);
    EXPECT_EQ(rep.aggregate_mape, 0.0);
    EXPECT_TRUE(rep.passed());
    EXPECT_EQ(rep.windows.front().issued_at, t.front() - Duration{3600});
    for (const auto& w : rep.windows) EXPECT_EQ(w.predicted.size(), 24u);
}

TEST(RollingDayAhead, TMinus23ForManySpans) {
    Rng rng(1);
    for (std::size_t T : {24, 25, 49, 100, 24 * 30}) {
        std::vector<double> a(T), p(T);
        for (std::size_t i = 0; i < T; ++i) a[i] = rng.uniform(5, 10), p[i] = rng.uniform(5, 10);
        const auto rep = rolling_day_ahead("c", grid(T, 3600), a, p, ThresholdPolicy{});
        ASSERT_EQ(rep.windows.size(), T - 23);
        double s = 0;
        for (const auto& w : rep.windows) s += *w.mape;
        EXPECT_NEAR(rep.aggregate_mape, s / static_cast<double>(rep.windows.size()), 1e-9 * rep.aggregate_mape);
    }
}

TEST(RollingDayAhead, ShortSpanAndBrokenGrid) {
    std::vector<double> a(23, 1.0);
    EXPECT_EQ(kind_of([&] { rolling_day_ahead("c", grid(23, 3600), a, a, ThresholdPolicy{}); }), ErrorKind::Span);
    auto t = grid(30, 3600);
    t[10] += Duration{60};
    std::vector<double> b(30, 1.0);
    EXPECT_THROW(rolling_day_ahead("c", t, b, b, ThresholdPolicy{}), Error);
}

TEST(RollingDayAhead, ForecasterReceivesEveryOrigin) {
    const auto t = grid(30, 3600);
    std::vector<double> a(30, 4.0);
    std::vector<std::size_t> origins;
    const auto rep = rolling_day_ahead(
        "c", t, a,
        [&](std::size_t origin, std::size_t h) {
            origins.push_back(origin);
            return std::vector<double>(h, 5.0);
        },
        ThresholdPolicy{});
    EXPECT_EQ(origins, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
    EXPECT_DOUBLE_EQ(rep.aggregate_mape, 25.0);
    EXPECT_DOUBLE_EQ(rep.aggregate_mae, 1.0);
    EXPECT_EQ(rep.score_mape, 0.0); // 25% >= 20%
    EXPECT_DOUBLE_EQ(rep.mae_threshold, 0.8); // 0.2 * 4 kW
    EXPECT_EQ(rep.score_mae, 0.0);
}

TEST(RollingDayAhead, PersistPreviousDayMatchesHandComputation) {
    // three days hourly; test span = days 2 and 3
    std::vector<double> v(72);
    for (std::size_t i = 0; i < 72; ++i) v[i] = 20.0 + 5.0 * std::sin(0.3 * static_cast<double>(i)) + static_cast<double>(i / 24);
    const LoadSeries s("c", ts("2021-05-03T00:00"), Cadence::Hour, v);
    std::vector<Timestamp> t;
    std::vector<double> actual, pred;
    for (std::size_t i = 24; i < 72; ++i) {
        t.push_back(s.time_at(i));
        actual.push_back(v[i]);
        pred.push_back(predict_baseline({BaselineKind::PersistPreviousDay}, s, s.time_at(i)));
    }
    const auto rep = rolling_day_ahead("c", t, actual, pred, ThresholdPolicy{});
    ASSERT_EQ(rep.windows.size(), 25u);
    double total = 0, total_mae = 0, mean_load = 0;
    for (std::size_t i = 24; i < 72; ++i) mean_load += v[i] / 48.0;
    std::size_t below_mape = 0, below_mae = 0;
    for (std::size_t k = 0; k < 25; ++k) {
        double m = 0, e = 0;
        for (std::size_t h = 0; h < 24; ++h) {
            const std::size_t i = 24 + k + h;
            m += std::abs((v[i] - v[i - 24]) / v[i]) * 100.0 / 24.0;
            e += std::abs(v[i] - v[i - 24]) / 24.0;
        }
        EXPECT_NEAR(*rep.windows[k].mape, m, 1e-9);
        EXPECT_NEAR(rep.windows[k].mae, e, 1e-9);
        total += m;
        total_mae += e;
        below_mape += m < 20.0;
        below_mae += e < 0.2 * mean_load;
    }
    EXPECT_NEAR(rep.aggregate_mape, total / 25.0, 1e-9);
    EXPECT_NEAR(rep.aggregate_mae, total_mae / 25.0, 1e-9);
    EXPECT_NEAR(rep.mean_load, mean_load, 1e-9);
    EXPECT_NEAR(rep.score_mape, 100.0 * static_cast<double>(below_mape) / 25.0, 1e-9);
    EXPECT_NEAR(rep.score_mae, 100.0 * static_cast<double>(below_mae) / 25.0, 1e-9);
}

TEST(RollingDayAhead, ZeroActualWindowsExcludedFromMape) {
    std::vector<double> a(30, 2.0), p(30, 2.2);
    a[29] = 0.0;
    const auto rep = rolling_day_ahead("c", grid(30, 3600), a, p, ThresholdPolicy{});
    EXPECT_EQ(rep.windows.size(), 7u);
    EXPECT_EQ(rep.excluded_windows, 1u);
    EXPECT_FALSE(rep.windows.back().mape.has_value());
    EXPECT_NEAR(rep.aggregate_mape, 10.0, 1e-9);
    EXPECT_NEAR(rep.score_mape, 100.0, 1e-9);
}

TEST(Rolling15, PersistenceOnConstantSeries) {
    std::vector<double> a(50, 3.3);
    const auto rep = rolling_15min("c", grid(50, 900), a, a, ThresholdPolicy{});
    EXPECT_EQ(rep.windows.size(), 50u);
    EXPECT_EQ(rep.aggregate_mape, 0.0);
    EXPECT_EQ(rep.score_mape, 100.0);
}

TEST(Rolling15, FourPointScoreAndMaeThreshold) {
    const std::vector<double> a{100, 100, 100, 100};
    const std::vector<double> p{105, 90, 120, 70};
    const auto rep = rolling_15min("c", grid(4, 900), a, p, ThresholdPolicy{});
    EXPECT_DOUBLE_EQ(rep.score_mape, 50.0);
    EXPECT_DOUBLE_EQ(rep.mae_threshold, 15.0);
    EXPECT_DOUBLE_EQ(rep.score_mae, 50.0);
    EXPECT_DOUBLE_EQ(rep.aggregate_mape, 16.25);
    EXPECT_EQ(kind_of([] { rolling_15min("c", {}, {}, {}, ThresholdPolicy{}); }), ErrorKind::Span);
}

TEST(Policy, ResidentialThresholdsAndValidation) {
    const auto r = ThresholdPolicy::for_type(ConsumerType::Residential);
    EXPECT_EQ(r.mape_threshold(Task::DayAhead), 30.0);
    EXPECT_EQ(r.mape_threshold(Task::QuarterHour), 25.0);
    const auto i = ThresholdPolicy::for_type(ConsumerType::Industrial);
    EXPECT_EQ(i.mape_threshold(Task::DayAhead), 20.0);
    EXPECT_EQ(i.mae_fraction(Task::QuarterHour), 0.15);
    ThresholdPolicy bad;
    bad.mae_fraction_day = 1.5;
    EXPECT_THROW(bad.validate(), Error);
    const auto back = policy_from_json(policy_to_json(r), ThresholdPolicy{});
    EXPECT_TRUE(back == r);
}

TEST(Compare, IdenticalReportsHaveZeroDeltas) {
    Rng rng(8);
    std::vector<double> a(60), p(60);
    for (std::size_t i = 0; i < 60; ++i) a[i] = rng.uniform(5, 10), p[i] = rng.uniform(5, 10);
    const auto rep = rolling_day_ahead("c", grid(60, 3600), a, p, ThresholdPolicy{});
    const auto c = compare_reports(rep, rep, "single", "fusion");
    EXPECT_EQ(c.delta_mape(), 0.0);
    EXPECT_EQ(c.delta_score_mape(), 0.0);
    EXPECT_EQ(c.delta_mae(), 0.0);
    EXPECT_EQ(c.delta_score_mae(), 0.0);
    std::ostringstream out;
    out << kComparisonCsvHeader << '\n';
    write_comparison_row(out, c);
    EXPECT_NE(out.str().find("c,day-ahead,single,fusion,20,"), std::string::npos) << out.str();

    std::vector<double> q(60);
    for (auto& x : q) x = rng.uniform(5, 10);
    const auto quarter = rolling_15min("c", grid(60, 900), a, q, ThresholdPolicy{});
    EXPECT_EQ(kind_of([&] { compare_reports(rep, quarter); }), ErrorKind::Policy);
    auto other = rep;
    other.policy.mape_thr_day = 25;
    EXPECT_EQ(kind_of([&] { compare_reports(rep, other); }), ErrorKind::Policy);
}

TEST(ReportOutputs, JsonCsvAndSvg) {
    std::vector<double> a(30, 2.0), p(30, 2.5);
    const auto rep = rolling_day_ahead("c9", grid(30, 3600), a, p, ThresholdPolicy{});
    const auto j = report_to_json(rep);
    EXPECT_EQ(j.at("windows").get<std::size_t>(), 7u);
    EXPECT_EQ(j.at("passed").get<bool>(), false);
    std::ostringstream csv, svg;
    write_windows_csv(csv, rep);
    const auto text = csv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 8);
    write_mape_svg(svg, rep, [](Timestamp t) { return t >= ts("2021-05-03T03:00"); });
    EXPECT_NE(svg.str().find("<polyline"), std::string::npos);
    EXPECT_NE(svg.str().find("fill-opacity"), std::string::npos);
}
