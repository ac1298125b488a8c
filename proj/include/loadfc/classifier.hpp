#pragma once

#include "loadfc/error.hpp"
#include "loadfc/series.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace loadfc {

/// Aggregate statistics of a min-max normalized load series, evaluated in the
/// calendar's local time.
struct ProfileStats {
    double c_h = 0.0;   // mean on public-holiday dates
    double c_w = 0.0;   // mean on Mon-Fri non-holidays
    double c_sat = 0.0; // mean on Saturdays
    double c_sun = 0.0; // mean on Sundays
    std::array<double, 24> hourly_means{};
    double hourly_std = 0.0; // population std of hourly_means
};

enum class ClassificationRule { Industrial, CommercialHourlyShape, CommercialSaturday, Fallback };

inline std::string_view to_string(ClassificationRule r) {
    switch (r) {
    case ClassificationRule::Industrial: return "rule1-industrial";
    case ClassificationRule::CommercialHourlyShape: return "rule2-hourly-std-and-holiday";
    case ClassificationRule::CommercialSaturday: return "rule2-saturday";
    case ClassificationRule::Fallback: return "fallback-residential";
    }
    return "unknown";
}

struct Classification {
    ConsumerType type = ConsumerType::Residential;
    ClassificationRule rule = ClassificationRule::Fallback;
};

inline ProfileStats profile_stats(const LoadSeries& series, const HolidayCalendar& cal) {
    using namespace std::chrono;
    const auto span = series.step() * static_cast<long>(series.size());
    if (span < days{28})
        throw Error(ErrorKind::Statistic, "series '" + series.consumer_id() + "' spans less than 4 full weeks");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.is_missing(i)) continue;
        lo = std::min(lo, series[i]);
        hi = std::max(hi, series[i]);
    }
    if (!std::isfinite(lo)) throw Error(ErrorKind::Statistic, "series '" + series.consumer_id() + "' has no data");
    const double range = hi - lo;

    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
        void add(double v) { sum += v, ++n; }
        double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    };
    Acc holiday, working, sat, sun;
    std::array<Acc, 24> by_hour{};
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.is_missing(i)) continue;
        const double v = range > 0.0 ? (series[i] - lo) / range : 0.0;
        const CivilTime c = cal.time_zone().civil(series.time_at(i));
        if (cal.is_public_holiday(c.date)) holiday.add(v);
        else if (c.weekday < 5) working.add(v);
        if (c.weekday == 5) sat.add(v);
        if (c.weekday == 6) sun.add(v);
        by_hour[static_cast<std::size_t>(c.hour)].add(v);
    }
    if (holiday.n == 0)
        throw Error(ErrorKind::Statistic, "series '" + series.consumer_id() +
                                              "' contains no public holiday; use a longer window");
    if (working.n == 0 || sat.n == 0 || sun.n == 0)
        throw Error(ErrorKind::Statistic, "series '" + series.consumer_id() + "' lacks working days or weekends");

    ProfileStats s;
    s.c_h = holiday.mean();
    s.c_w = working.mean();
    s.c_sat = sat.mean();
    s.c_sun = sun.mean();
    for (std::size_t h = 0; h < 24; ++h) s.hourly_means[h] = by_hour[h].mean();
    const double mean = std::accumulate(s.hourly_means.begin(), s.hourly_means.end(), 0.0) / 24.0;
    double var = 0.0;
    for (double m : s.hourly_means) var += (m - mean) * (m - mean);
    s.hourly_std = std::sqrt(var / 24.0);
    return s;
}

/// Rule 1 (industrial), then Rule 2 (commercial), then residential.
inline Classification classify_detailed(const ProfileStats& s) {
    if (s.c_h < s.c_w / 2.0 && s.c_sat < 2.0 * s.c_sun) return {ConsumerType::Industrial, ClassificationRule::Industrial};
    if (s.hourly_std > 0.1 && s.c_h < s.c_w)
        return {ConsumerType::Commercial, ClassificationRule::CommercialHourlyShape};
    if (s.c_sat > 1.5 * s.c_sun) return {ConsumerType::Commercial, ClassificationRule::CommercialSaturday};
    return {ConsumerType::Residential, ClassificationRule::Fallback};
}

inline ConsumerType classify(const ProfileStats& s) { return classify_detailed(s).type; }

struct ConfusionMatrix {
    std::array<std::array<std::size_t, 3>, 3> counts{}; // [truth][predicted]

    void add(ConsumerType truth, ConsumerType predicted) { ++counts[index_of(truth)][index_of(predicted)]; }

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), std::size_t{0});
        return t;
    }

    std::size_t row_total(ConsumerType truth) const {
        const auto& row = counts[index_of(truth)];
        return std::accumulate(row.begin(), row.end(), std::size_t{0});
    }

    double class_accuracy(ConsumerType truth) const {
        const auto n = row_total(truth);
        return n ? static_cast<double>(counts[index_of(truth)][index_of(truth)]) / static_cast<double>(n) : 0.0;
    }

    double accuracy() const {
        const auto n = total();
        if (!n) return 0.0;
        return static_cast<double>(counts[0][0] + counts[1][1] + counts[2][2]) / static_cast<double>(n);
    }

    void write_csv(std::ostream& out) const {
        static constexpr std::array<ConsumerType, 3> types{ConsumerType::Industrial, ConsumerType::Commercial,
                                                           ConsumerType::Residential};
        out << "truth\\predicted";
        for (auto t : types) out << ',' << to_string(t);
        out << ",class_accuracy\n";
        for (auto truth : types) {
            out << to_string(truth);
            for (auto p : types) out << ',' << counts[index_of(truth)][index_of(p)];
            out << ',' << class_accuracy(truth) << '\n';
        }
        out << "overall,,,," << accuracy() << '\n';
    }
};

/// Number of contiguous subsets each record of a given declared type is cut into.
using SplitCounts = std::array<std::size_t, 3>;

/// Contiguous near-equal subsets; the last one absorbs the remainder.
inline std::vector<LoadSeries> split_series(const LoadSeries& s, std::size_t parts) {
    std::vector<LoadSeries> out;
    const std::size_t len = s.size() / parts;
    for (std::size_t k = 0; k < parts; ++k) {
        const std::size_t first = k * len;
        out.push_back(s.slice(first, k + 1 == parts ? s.size() - first : len));
    }
    return out;
}

inline ConfusionMatrix evaluate_classifier(const std::vector<ConsumerRecord>& records, const SplitCounts& split_counts,
                                           const HolidayCalendar& cal) {
    for (auto c : split_counts)
        if (c < 1) throw Error(ErrorKind::Config, "split counts must be at least 1 per class");
    ConfusionMatrix m;
    for (const auto& r : records) {
        if (!r.declared_type) throw Error(ErrorKind::Data, "record '" + r.consumer_id + "' has no declared type");
        const auto parts = split_counts[index_of(*r.declared_type)];
        for (const auto& subset : split_series(r.load, parts)) {
            try {
                m.add(*r.declared_type, classify(profile_stats(subset, cal)));
            } catch (const Error& e) {
                throw e.with_context("record '" + r.consumer_id + "'");
            }
        }
    }
    return m;
}

} // namespace loadfc
