#include "loadfc/classifier.hpp"
#include "loadfc/io.hpp"
#include "loadfc/synth.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace loadfc;
using namespace testing_support;

namespace {

HolidayCalendar cal_2021() { return spanish_holidays(2021, 2022); }

WeatherSeries weather_for(const SynthConfig& c, std::uint64_t seed = 1) {
    return synth_weather(c.zone_id, c.start, c.weeks * 7 * 24 + 24, seed);
}

ConsumerRecord make(ConsumerType type, std::uint64_t seed, std::size_t weeks = 12, Cadence cadence = Cadence::Hour) {
    auto c = SynthConfig::defaults(type);
    c.seed = seed;
    c.weeks = weeks;
    c.cadence = cadence;
    return generate(c, cal_2021(), weather_for(c));
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace

TEST(Synth, IndustrialSatisfiesRuleOne) {
    for (std::uint64_t seed : {1u, 2u, 3u, 17u, 99u}) {
        const auto r = make(ConsumerType::Industrial, seed);
        const auto s = profile_stats(r.load, cal_2021());
        EXPECT_LT(s.c_h, s.c_w / 2) << seed;
        EXPECT_LT(s.c_sat, 2 * s.c_sun) << seed;
        EXPECT_EQ(classify(s), ConsumerType::Industrial);
    }
}

TEST(Synth, BehaviouralTargets) {
    const auto cal = cal_2021();
    // commercial: Saturday above 1.5x Sunday
    const auto com = profile_stats(make(ConsumerType::Commercial, 5).load, cal);
    EXPECT_GT(com.c_sat, 1.5 * com.c_sun);
    // residential: weekends close to weekdays
    const auto res = profile_stats(make(ConsumerType::Residential, 5).load, cal);
    EXPECT_GT(res.c_sat, 0.8 * res.c_w);
    EXPECT_LT(res.c_sat, 1.5 * res.c_w);
    // industrial: holiday level at most 10% of the weekday level
    const auto c = SynthConfig::defaults(ConsumerType::Industrial);
    EXPECT_LE(c.holiday_level, 0.1 * c.weekday_level);
    EXPECT_LE(c.saturday_level, 0.1 * c.weekday_level);
    EXPECT_EQ(c.temp_sensitivity, 0.0);
}

TEST(Synth, NoiselessResidentialIsWeeklyPeriodic) {
    auto c = SynthConfig::defaults(ConsumerType::Residential);
    c.weeks = 6;
    c.cadence = Cadence::Hour;
    c.noise = 0.0;
    c.jitter_hours = 0.0;
    c.spike_probability = 0.0;
    c.temp_sensitivity = 0.0;
    c.day_level_sd = 0.0;
    c.start = ts("2021-02-28T23:00");
    HolidayCalendar none;
    none.set_coverage(std::chrono::year{2021} / 1 / 1, std::chrono::year{2021} / 12 / 31);
    const auto r = generate(c, none, weather_for(c));
    const auto& v = r.load.values();
    // weeks 2..3 against 1..2, all before the late-March clock change
    const std::vector<double> a1(v.begin(), v.begin() + 168 * 2), b1(v.begin() + 168, v.begin() + 168 * 3);
    EXPECT_EQ(a1, b1);
    EXPECT_NEAR(correlation(a1, b1), 1.0, 1e-12);
    for (double x : v) EXPECT_GT(x, 0.0);
}

TEST(Synth, DeterministicPerSeed) {
    const auto a = make(ConsumerType::Residential, 7, 5, Cadence::QuarterHour);
    const auto b = make(ConsumerType::Residential, 7, 5, Cadence::QuarterHour);
    const auto c = make(ConsumerType::Residential, 8, 5, Cadence::QuarterHour);
    EXPECT_EQ(a.load.values(), b.load.values());
    EXPECT_NE(a.load.values(), c.load.values());
    EXPECT_EQ(a.declared_type, ConsumerType::Residential);
}

TEST(Synth, ShortSpanAndWeatherCoverage) {
    auto c = SynthConfig::defaults(ConsumerType::Commercial);
    c.weeks = 3;
    try {
        generate(c, cal_2021(), weather_for(c));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
    c.weeks = 4;
    const auto short_weather = synth_weather(c.zone_id, c.start, 24 * 7, 1);
    try {
        generate(c, cal_2021(), short_weather);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Coverage);
    }
}

TEST(Synth, CommercialTracksHeatInSummer) {
    auto c = SynthConfig::defaults(ConsumerType::Commercial);
    c.cadence = Cadence::Hour;
    c.weeks = 40;
    const auto w = weather_for(c, 3);
    const auto r = generate(c, cal_2021(), w);
    // June to August, opening hours of working days
    std::vector<double> load, excess;
    const auto tz = cal_2021().time_zone();
    for (std::size_t i = 0; i < r.load.size(); ++i) {
        const auto t = r.load.time_at(i);
        const auto civ = tz.civil(t);
        const unsigned m = static_cast<unsigned>(civ.month);
        if (m < 6 || m > 8 || civ.weekday >= 5 || civ.hour < 10 || civ.hour > 19) continue;
        const auto wi = static_cast<std::size_t>((t - w.start).count() / 3600);
        load.push_back(r.load[i]);
        excess.push_back(std::max(0.0, w.temperature_c[wi] - c.comfort_hi));
    }
    ASSERT_GT(load.size(), 200u);
    EXPECT_GT(correlation(load, excess), 0.0);
}

TEST(Fleet, CountsLabelsAndLocations) {
    FleetConfig fc;
    fc.weeks = 8;
    fc.cadence = Cadence::Hour;
    const auto f = generate_fleet(fc);
    ASSERT_EQ(f.records.size(), 66u);
    std::map<ConsumerType, int> counts;
    for (const auto& r : f.records) {
        counts[*r.declared_type]++;
        for (double v : r.load.values()) ASSERT_GE(v, 0.0);
        ASSERT_TRUE(f.location.count(r.consumer_id));
    }
    EXPECT_EQ(counts[ConsumerType::Industrial], 30);
    EXPECT_EQ(counts[ConsumerType::Commercial], 30);
    EXPECT_EQ(counts[ConsumerType::Residential], 6);
    EXPECT_EQ(f.records.front().consumer_id, "ind_01");
    EXPECT_EQ(f.records.back().consumer_id, "res_06");
    EXPECT_EQ(f.location.at("ind_01"), "loc_01");
    EXPECT_EQ(f.location.at("ind_04"), "loc_02");

    // every industrial record passes rule 1; labels agree with the classifier on >= 90%
    std::size_t agree = 0;
    for (const auto& r : f.records) {
        const auto s = profile_stats(r.load, f.calendar);
        if (r.declared_type == ConsumerType::Industrial) {
            EXPECT_LT(s.c_h, s.c_w / 2) << r.consumer_id;
            EXPECT_LT(s.c_sat, 2 * s.c_sun) << r.consumer_id;
        }
        agree += classify(s) == *r.declared_type;
    }
    EXPECT_GE(static_cast<double>(agree) / 66.0, 0.9);
}

TEST(Fleet, SeedChangesValuesNotLabelsAndJobsChangeNothing) {
    FleetConfig fc;
    fc.industrial = 2;
    fc.commercial = 2;
    fc.residential = 2;
    fc.weeks = 4;
    const auto a = generate_fleet(fc);
    fc.jobs = 3;
    const auto par = generate_fleet(fc);
    fc.seed = 43;
    const auto b = generate_fleet(fc);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].load.values(), par.records[i].load.values());
        EXPECT_EQ(a.records[i].declared_type, b.records[i].declared_type);
        EXPECT_NE(a.records[i].load.values(), b.records[i].load.values());
    }
}

TEST(Fleet, WrittenCorpusReadsBack) {
    FleetConfig fc;
    fc.industrial = 1;
    fc.commercial = 1;
    fc.residential = 1;
    fc.weeks = 4;
    const auto f = generate_fleet(fc);
    const auto dir = std::filesystem::temp_directory_path() / "loadfc_synth_corpus";
    std::filesystem::remove_all(dir);
    write_fleet(f, dir);
    for (const auto& r : f.records) {
        const auto back = ingest_load_csv(dir / "load" / (r.consumer_id + ".csv"), r.load.cadence());
        ASSERT_EQ(back.size(), r.load.size());
        for (std::size_t i = 0; i < back.size(); ++i) EXPECT_NEAR(back[i], r.load[i], 1e-9 * (1 + r.load[i]));
    }
    const auto cal = read_holiday_calendar(dir / "holidays.txt", madrid());
    EXPECT_TRUE(cal.is_public_holiday(std::chrono::year{2021} / 4 / 2));
    EXPECT_EQ(read_socio_csv(dir / "socio.csv").size(), fc.zones.size());
    EXPECT_TRUE(std::filesystem::exists(dir / "labels.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "consumers.csv"));
    std::filesystem::remove_all(dir);
}

TEST(Calendar, EasterDates) {
    using namespace std::chrono;
    EXPECT_EQ(easter_sunday(2021), year{2021} / April / 4);
    EXPECT_EQ(easter_sunday(2022), year{2022} / April / 17);
    EXPECT_EQ(easter_sunday(2024), year{2024} / March / 31);
    EXPECT_EQ(easter_sunday(2000), year{2000} / April / 23);
}
