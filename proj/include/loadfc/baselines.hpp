#pragma once

#include "loadfc/align.hpp"
#include "loadfc/error.hpp"
#include "loadfc/series.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace loadfc {

enum class BaselineKind { PersistLastStep, PersistPreviousDay, ResidentialDay, ResidentialQuarterHour };

inline std::string_view to_string(BaselineKind k) {
    switch (k) {
    case BaselineKind::PersistLastStep: return "persist-last-step";
    case BaselineKind::PersistPreviousDay: return "persist-previous-day";
    case BaselineKind::ResidentialDay: return "residential-day";
    case BaselineKind::ResidentialQuarterHour: return "residential-15min";
    }
    return "unknown";
}

inline BaselineKind baseline_kind_from_string(std::string_view s) {
    for (auto k : {BaselineKind::PersistLastStep, BaselineKind::PersistPreviousDay, BaselineKind::ResidentialDay,
                   BaselineKind::ResidentialQuarterHour})
        if (to_string(k) == s) return k;
    throw Error(ErrorKind::Config, "unknown baseline '" + std::string(s) + "'");
}

struct BaselineParams {
    BaselineKind kind = BaselineKind::PersistPreviousDay;
    // residential-15min weights: last point, same time on the last days, same
    // time and weekday on the last weeks
    double w_last = 0.6;
    double w_day = 0.2;
    double w_week = 0.2;
    std::size_t day_lags = 4;
    std::size_t week_lags = 4;

    void validate() const {
        if (std::abs(w_last + w_day + w_week - 1.0) > 1e-12)
            throw Error(ErrorKind::Config, "baseline weights must sum to 1");
        if (w_last < 0 || w_day < 0 || w_week < 0) throw Error(ErrorKind::Config, "baseline weights must be >= 0");
        if (day_lags == 0 || week_lags == 0) throw Error(ErrorKind::Config, "baseline needs at least one day/week lag");
    }
};

/// A baseline forecast as a weighted sum of lagged observations.
struct BaselineTerm {
    std::size_t lag; // steps back from the target time
    double weight;
};

inline std::vector<BaselineTerm> baseline_terms(const BaselineParams& p, Cadence cadence) {
    p.validate();
    const std::size_t day = steps_per_day(cadence);
    const std::size_t week = 7 * day;
    switch (p.kind) {
    case BaselineKind::PersistLastStep: return {{1, 1.0}};
    case BaselineKind::PersistPreviousDay: return {{day, 1.0}};
    case BaselineKind::ResidentialDay: return {{day, 0.5}, {week, 0.5}};
    case BaselineKind::ResidentialQuarterHour: {
        std::vector<BaselineTerm> terms{{1, p.w_last}};
        for (std::size_t d = 1; d <= p.day_lags; ++d)
            terms.push_back({d * day, p.w_day / static_cast<double>(p.day_lags)});
        for (std::size_t w = 1; w <= p.week_lags; ++w)
            terms.push_back({w * week, p.w_week / static_cast<double>(p.week_lags)});
        return terms;
    }
    }
    return {};
}

inline std::size_t baseline_min_lag(const BaselineParams& p, Cadence cadence) {
    std::size_t m = std::numeric_limits<std::size_t>::max();
    for (const auto& t : baseline_terms(p, cadence)) m = std::min(m, t.lag);
    return m;
}

inline std::size_t baseline_max_lag(const BaselineParams& p, Cadence cadence) {
    std::size_t m = 0;
    for (const auto& t : baseline_terms(p, cadence)) m = std::max(m, t.lag);
    return m;
}

/// Baseline forecast for instant `at` (on or after the history grid) from the
/// observations in `history`.
inline double predict_baseline(const BaselineParams& p, const LoadSeries& history, Timestamp at) {
    if (at < history.start() || (at - history.start()).count() % history.step().count() != 0)
        throw Error(ErrorKind::Horizon, format_timestamp(at) + " is not on the history grid");
    const auto idx = static_cast<std::size_t>((at - history.start()).count() / history.step().count());
    double acc = 0.0;
    for (const auto& term : baseline_terms(p, history.cadence())) {
        if (term.lag > idx || idx - term.lag >= history.size() || history.is_missing(idx - term.lag))
            throw Error(ErrorKind::Horizon, std::string(to_string(p.kind)) + " at " + format_timestamp(at) +
                                                " needs lag " + std::to_string(term.lag) + " steps (" +
                                                format_timestamp(at - history.step() * static_cast<long>(term.lag)) +
                                                "), which is not in the history");
        acc += term.weight * history[idx - term.lag];
    }
    return acc;
}

/// Baseline evaluated at every table row from the table's own target history;
/// NaN where a lag is unavailable.
inline std::vector<double> baseline_column(const BaselineParams& p, const AlignedTable& t) {
    const auto terms = baseline_terms(p, t.cadence);
    std::vector<double> out(t.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < t.size(); ++r) {
        double acc = 0.0;
        bool ok = true;
        for (const auto& term : terms) {
            if (term.lag > r || std::isnan(t.target[r - term.lag])) {
                ok = false;
                break;
            }
            acc += term.weight * t.target[r - term.lag];
        }
        if (ok) out[r] = acc;
    }
    return out;
}

} // namespace loadfc
