#include "loadfc/align.hpp"
#include "loadfc/io.hpp"
#include "loadfc/rng.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace loadfc;
using namespace std::chrono;

namespace {

Timestamp ts(const char* s) { return *parse_timestamp(s); }

LoadSeries read(const std::string& text, Cadence c = Cadence::QuarterHour, double max_missing = 0.2) {
    std::istringstream in(text);
    return read_load_csv(in, c, {"c1", max_missing});
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

WeatherSeries hourly_weather(Timestamp start, std::size_t hours) {
    WeatherSeries w;
    w.zone_id = "z";
    w.start = start;
    for (std::size_t i = 0; i < hours; ++i) {
        w.temperature_c.push_back(10.0 + static_cast<double>(i));
        w.humidity_pct.push_back(50.0);
    }
    return w;
}

} // namespace

TEST(Timestamps, ParseAndFormat) {
    EXPECT_EQ(format_timestamp(ts("2021-03-04T05:06:07Z")), "2021-03-04T05:06:07Z");
    EXPECT_EQ(format_timestamp(ts("2021-03-04 05:06")), "2021-03-04T05:06:00Z");
    EXPECT_FALSE(parse_timestamp("2021-13-01T00:00"));
    EXPECT_FALSE(parse_timestamp("2021-02-30T00:00"));
    EXPECT_FALSE(parse_timestamp("2021-01-01T24:00"));
    EXPECT_FALSE(parse_timestamp("2021-01-01T00:00+02:00"));
}

TEST(TimeZone, MadridOffsetsFollowEuropeanSummerTime) {
    const auto tz = TimeZone::from_name("Europe/Madrid");
    EXPECT_EQ(tz.offset_at(ts("2021-01-15T12:00")).count(), 3600);
    EXPECT_EQ(tz.offset_at(ts("2021-07-15T12:00")).count(), 7200);
    // 2021 switch: 28 March 01:00 UTC, back on 31 October 01:00 UTC
    EXPECT_EQ(tz.offset_at(ts("2021-03-28T00:59")).count(), 3600);
    EXPECT_EQ(tz.offset_at(ts("2021-03-28T01:00")).count(), 7200);
    EXPECT_EQ(tz.offset_at(ts("2021-10-31T00:59")).count(), 7200);
    EXPECT_EQ(tz.offset_at(ts("2021-10-31T01:00")).count(), 3600);
    // 23:30 UTC on 31 Dec is already New Year's Day in Madrid
    const auto c = tz.civil(ts("2020-12-31T23:30"));
    EXPECT_EQ(format_date(c.date), "2021-01-01");
    EXPECT_EQ(c.hour, 0);
    EXPECT_EQ(c.weekday, 4u); // Friday
}

TEST(TimeZone, SouthernHemisphereRule) {
    const auto tz = TimeZone::from_posix("<-03>3<-02>,M10.1.0/0,M3.3.0/0");
    EXPECT_EQ(tz.offset_at(ts("2021-01-10T12:00")).count(), -7200);
    EXPECT_EQ(tz.offset_at(ts("2021-06-10T12:00")).count(), -10800);
}

TEST(IngestLoadCsv, ExactGridHasNoMissing) {
    const auto s = read("timestamp,kw\n2021-01-01T00:00Z,1\n2021-01-01T00:15Z,2\n2021-01-01T00:30Z,3\n2021-01-01T00:45Z,4\n");
    EXPECT_EQ(s.size(), 4u);
    EXPECT_EQ(s.missing_count(), 0u);
    EXPECT_DOUBLE_EQ(s[3], 4.0);
}

TEST(IngestLoadCsv, AbsentSlotIsMarkedMissing) {
    const auto s = read("timestamp,kw\n2021-01-01T00:00Z,1\n2021-01-01T00:15Z,2\n2021-01-01T00:45Z,4\n2021-01-01T01:00Z,5\n");
    ASSERT_EQ(s.size(), 5u);
    EXPECT_EQ(s.missing_count(), 1u);
    EXPECT_TRUE(s.is_missing(2));
}

TEST(IngestLoadCsv, InvalidMonthCitesRowOne) {
    try {
        read("timestamp,kw\n2021-13-01T00:00,1\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Parse);
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
    }
}

TEST(IngestLoadCsv, OrderingAndQualityErrors) {
    EXPECT_EQ(kind_of([] { read("timestamp,kw\n2021-01-01T00:15Z,1\n2021-01-01T00:00Z,2\n"); }), ErrorKind::Ordering);
    EXPECT_EQ(kind_of([] { read("timestamp,kw\n2021-01-01T00:15Z,1\n2021-01-01T00:15Z,2\n"); }), ErrorKind::Ordering);
    EXPECT_EQ(kind_of([] { read("timestamp,kw\n2021-01-01T00:00Z,1\n2021-01-01T01:00Z,2\n"); }), ErrorKind::Quality);
    EXPECT_EQ(kind_of([] { read("timestamp,kw\n2021-01-01T00:00Z,abc\n"); }), ErrorKind::Parse);
    EXPECT_EQ(kind_of([] { read("time,kw\n2021-01-01T00:00Z,1\n"); }), ErrorKind::Parse);
    // configurable threshold: 3 of 5 missing passes at 0.7
    EXPECT_NO_THROW(read("timestamp,kw\n2021-01-01T00:00Z,1\n2021-01-01T01:00Z,2\n", Cadence::QuarterHour, 0.7));
}

TEST(IngestLoadCsv, RoundTripPreservesValuesAndMask) {
    Rng rng(7);
    std::vector<double> v(500);
    std::vector<bool> miss(500);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = rng.uniform(0.0, 250.0) / 3.0;
        miss[i] = rng.uniform() < 0.1;
    }
    miss.front() = miss.back() = false;
    const LoadSeries s("c1", ts("2021-06-01T00:00"), Cadence::QuarterHour, v, miss);
    std::stringstream buf;
    write_load_csv(buf, s);
    const auto back = read_load_csv(buf, Cadence::QuarterHour, {"c1", 0.2});
    ASSERT_EQ(back.size(), s.size());
    EXPECT_EQ(back.start(), s.start());
    EXPECT_EQ(back.missing(), s.missing());
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!s.is_missing(i)) EXPECT_EQ(back[i], s[i]) << i;
}

TEST(ResampleToHourly, MeansOfAvailableQuarters) {
    const double nan = std::nan("");
    const LoadSeries s("c", ts("2021-01-01T00:00"), Cadence::QuarterHour,
                       {1, 1, 1, 1, 2, 4, 6, 8, 3, nan, nan, nan, nan, nan, nan, nan});
    const auto r = resample_to_hourly_with_support(s);
    ASSERT_EQ(r.series.size(), 4u);
    EXPECT_EQ(r.series.cadence(), Cadence::Hour);
    EXPECT_DOUBLE_EQ(r.series[0], 1.0);
    EXPECT_DOUBLE_EQ(r.series[1], 5.0);
    EXPECT_DOUBLE_EQ(r.series[2], 3.0);
    EXPECT_EQ(r.support[2], 1);
    EXPECT_TRUE(r.series.is_missing(3));
    EXPECT_EQ(kind_of([&] { resample_to_hourly(r.series); }), ErrorKind::Config);
}

TEST(ResampleToHourly, PreservesEnergyOverCompleteHours) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(4 * (10 + trial));
        for (auto& x : v) x = rng.uniform(0.0, 100.0);
        const LoadSeries s("c", ts("2021-01-01T00:00"), Cadence::QuarterHour, v);
        const auto h = resample_to_hourly(s);
        double quarter_sum = 0.0, hour_sum = 0.0;
        for (double x : v) quarter_sum += x;
        for (double x : h.values()) hour_sum += x;
        EXPECT_NEAR(hour_sum * 4.0, quarter_sum, 1e-9 * quarter_sum);
    }
}

TEST(AlignCovariates, HourlyOneToOne) {
    const LoadSeries load("c", ts("2021-01-01T00:00"), Cadence::Hour, std::vector<double>(48, 1.0));
    const HolidayCalendar cal({2021y / 1 / 1});
    const auto t = align_covariates(load, hourly_weather(ts("2021-01-01T00:00"), 48), cal, std::nullopt);
    ASSERT_EQ(t.size(), 48u);
    for (std::size_t i = 0; i < 48; ++i) EXPECT_DOUBLE_EQ(t.temperature[i], 10.0 + static_cast<double>(i));
}

TEST(AlignCovariates, QuarterHourRepeatsEachWeatherValueFourTimes) {
    const LoadSeries load("c", ts("2021-01-01T00:00"), Cadence::QuarterHour, std::vector<double>(16, 1.0));
    const auto t = align_covariates(load, hourly_weather(ts("2021-01-01T00:00"), 4), HolidayCalendar{}, std::nullopt);
    ASSERT_EQ(t.size(), 16u);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(t.temperature[i], 10.0 + static_cast<double>(i / 4));
}

TEST(AlignCovariates, HolidayFlagFollowsLocalCivilDate) {
    // 2020-12-31T23:00Z is 2021-01-01 00:00 in Madrid
    const LoadSeries load("c", ts("2020-12-31T00:00"), Cadence::Hour, std::vector<double>(72, 1.0));
    const HolidayCalendar cal({2021y / 1 / 1});
    const auto t = align_covariates(load, hourly_weather(ts("2020-12-31T00:00"), 72), cal, std::nullopt);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const bool expected = t.timestamps[i] >= ts("2020-12-31T23:00") && t.timestamps[i] < ts("2021-01-01T23:00");
        EXPECT_EQ(t.holiday[i] == 1, expected) << format_timestamp(t.timestamps[i]);
    }
}

TEST(AlignCovariates, ForwardFillsWithinToleranceAndReportsGaps) {
    auto w = hourly_weather(ts("2021-01-01T00:00"), 12);
    for (std::size_t i = 3; i < 6; ++i) w.temperature_c[i] = std::nan("");
    const LoadSeries load("c", ts("2021-01-01T00:00"), Cadence::Hour, std::vector<double>(12, 1.0));
    const auto t = align_covariates(load, w, HolidayCalendar{}, std::nullopt);
    EXPECT_DOUBLE_EQ(t.temperature[5], 12.0); // filled from 02:00

    for (std::size_t i = 3; i < 7; ++i) w.temperature_c[i] = std::nan("");
    try {
        align_covariates(load, w, HolidayCalendar{}, std::nullopt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Coverage);
        EXPECT_NE(std::string(e.what()).find("2021-01-01T02:00:00Z .. 2021-01-01T07:00:00Z"), std::string::npos)
            << e.what();
    }
}

TEST(AlignCovariates, NeverUsesLaterWeather) {
    auto w = hourly_weather(ts("2021-01-01T00:00"), 6);
    const LoadSeries load("c", ts("2021-01-01T00:00"), Cadence::QuarterHour, std::vector<double>(24, 1.0));
    const auto t = align_covariates(load, w, HolidayCalendar{}, std::nullopt);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto used_hour = static_cast<std::size_t>(t.temperature[i] - 10.0);
        EXPECT_LE(w.time_at(used_hour), t.timestamps[i]);
    }
}

TEST(HolidayFile, CommentsAndBlankLines) {
    std::istringstream in("# national\n2021-01-01\n\n2021-01-06  # epiphany\n");
    const auto d = read_holiday_dates(in);
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(format_date(d[1]), "2021-01-06");
    std::istringstream bad("2021-02-30\n");
    EXPECT_THROW(read_holiday_dates(bad), Error);
}

TEST(SocioCsv, ParsesAndValidates) {
    std::istringstream in("zone_id,population,density,tsi,gdhi\nz1,1000,50.5,98.2,15000\n");
    const auto m = read_socio_csv(in);
    ASSERT_EQ(m.count("z1"), 1u);
    EXPECT_DOUBLE_EQ(m.at("z1").population_density, 50.5);
    std::istringstream bad("zone_id,population,density,tsi,gdhi\nz1,0,50.5,98.2,15000\n");
    EXPECT_THROW(read_socio_csv(bad), Error);
}

TEST(WeatherCsv, HumidityOutOfRangeRejected) {
    std::istringstream in("timestamp,temp_c,humidity_pct\n2021-01-01T00:00Z,10,101\n");
    EXPECT_THROW(read_weather_csv(in, "z"), Error);
}
