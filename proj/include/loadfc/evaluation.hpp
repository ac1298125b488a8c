#pragma once

#include "loadfc/error.hpp"
#include "loadfc/features.hpp"
#include "loadfc/io.hpp"
#include "loadfc/metrics.hpp"
#include "loadfc/series.hpp"

#include "json.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace loadfc {

/// MAPE/MAE thresholds and score targets. The MAE threshold of a report is
/// a fraction of the consumer's mean load over the test span.
struct ThresholdPolicy {
    double mape_thr_day = 20.0;
    double mape_thr_15 = 15.0;
    double mae_fraction_day = 0.20;
    double mae_fraction_15 = 0.15;
    double score_target_day = 80.0;
    double score_target_15 = 85.0;

    static ThresholdPolicy for_type(ConsumerType type) {
        ThresholdPolicy p;
        if (type == ConsumerType::Residential) {
            p.mape_thr_day = 30.0;
            p.mape_thr_15 = 25.0;
        }
        return p;
    }

    void validate() const {
        if (!(mape_thr_day > 0 && mape_thr_15 > 0)) throw Error(ErrorKind::Config, "MAPE thresholds must be > 0");
        for (double f : {mae_fraction_day, mae_fraction_15})
            if (!(f > 0.0 && f < 1.0)) throw Error(ErrorKind::Config, "MAE fractions must be in (0, 1)");
        for (double s : {score_target_day, score_target_15})
            if (!(s >= 0.0 && s <= 100.0)) throw Error(ErrorKind::Config, "score targets must be in [0, 100]");
    }

    double mape_threshold(Task t) const { return t == Task::DayAhead ? mape_thr_day : mape_thr_15; }
    double mae_fraction(Task t) const { return t == Task::DayAhead ? mae_fraction_day : mae_fraction_15; }
    double score_target(Task t) const { return t == Task::DayAhead ? score_target_day : score_target_15; }

    bool operator==(const ThresholdPolicy&) const = default;
};

struct ForecastWindow {
    Timestamp issued_at{};
    std::size_t horizon_steps = 0;
    std::vector<double> predicted;
    std::vector<double> actual;
    std::optional<double> mape; // absent when an actual is 0
    double mae = 0.0;
};

struct EvalReport {
    std::string consumer_id;
    Task task = Task::DayAhead;
    ThresholdPolicy policy;
    double mean_load = 0.0;
    double mape_threshold = 0.0;
    double mae_threshold = 0.0;
    double score_target = 0.0;
    std::vector<ForecastWindow> windows;
    double aggregate_mape = 0.0; // mean over windows with a defined MAPE
    double aggregate_mae = 0.0;
    double score_mape = 0.0;
    double score_mae = 0.0;
    std::size_t excluded_windows = 0; // MAPE undefined (zero actual)

    bool passes_mape() const { return score_mape >= score_target; }
    bool passes_mae() const { return score_mae >= score_target; }
    bool passed() const { return passes_mape() && passes_mae(); }
};

/// Predicted values for the window whose first target is test index `origin`.
using WindowForecaster = std::function<std::vector<double>(std::size_t origin, std::size_t horizon)>;

namespace detail {

inline void check_grid(std::span<const Timestamp> ts, Duration step, const char* what) {
    for (std::size_t i = 1; i < ts.size(); ++i)
        if (ts[i] - ts[i - 1] != step)
            throw Error(ErrorKind::Config, std::string(what) + " expects a contiguous " + std::to_string(step.count() / 60) +
                                               "-minute test grid (break at " + format_timestamp(ts[i]) + ")");
}

inline EvalReport score_windows(std::string consumer_id, Task task, const ThresholdPolicy& policy,
                                std::span<const double> actual, std::vector<ForecastWindow> windows) {
    policy.validate();
    EvalReport rep;
    rep.consumer_id = std::move(consumer_id);
    rep.task = task;
    rep.policy = policy;
    double load_sum = 0.0;
    std::size_t load_n = 0;
    for (double a : actual)
        if (std::isfinite(a)) load_sum += a, ++load_n;
    rep.mean_load = load_n ? load_sum / static_cast<double>(load_n) : 0.0;
    rep.mape_threshold = policy.mape_threshold(task);
    rep.mae_threshold = policy.mae_fraction(task) * rep.mean_load;
    rep.score_target = policy.score_target(task);

    std::vector<double> mapes, maes;
    for (auto& w : windows) {
        w.mae = mae(w.actual, w.predicted);
        const bool zero = std::any_of(w.actual.begin(), w.actual.end(), [](double a) { return a == 0.0; });
        if (zero) ++rep.excluded_windows;
        else w.mape = mape(w.actual, w.predicted);
        if (w.mape) mapes.push_back(*w.mape);
        maes.push_back(w.mae);
    }
    rep.windows = std::move(windows);
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    rep.aggregate_mape = mean(mapes);
    rep.aggregate_mae = mean(maes);
    rep.score_mape = quantitative_score(mapes, rep.mape_threshold);
    rep.score_mae = quantitative_score(maes, rep.mae_threshold);
    return rep;
}

} // namespace detail

/// Issues a 24-step forecast at every hourly step of the test span whose
/// full 24 h of actuals exist: T - 23 overlapping windows for a complete
/// span of T points.
inline EvalReport rolling_day_ahead(const std::string& consumer_id, std::span<const Timestamp> timestamps,
                                    std::span<const double> actual, const WindowForecaster& forecaster,
                                    const ThresholdPolicy& policy) {
    constexpr std::size_t horizon = 24;
    if (timestamps.size() != actual.size()) throw Error(ErrorKind::Data, "timestamps and actuals differ in length");
    if (timestamps.size() < horizon)
        throw Error(ErrorKind::Span, "day-ahead evaluation needs at least 24 hourly test points, got " +
                                         std::to_string(timestamps.size()));
    detail::check_grid(timestamps, Duration{3600}, "rolling_day_ahead");
    std::vector<ForecastWindow> windows;
    for (std::size_t k = 0; k + horizon <= timestamps.size(); ++k) {
        const auto act = actual.subspan(k, horizon);
        if (std::any_of(act.begin(), act.end(), [](double a) { return !std::isfinite(a); })) continue;
        auto pred = forecaster(k, horizon);
        if (pred.size() != horizon || std::any_of(pred.begin(), pred.end(), [](double p) { return !std::isfinite(p); }))
            continue;
        ForecastWindow w;
        w.issued_at = timestamps[k] - Duration{3600};
        w.horizon_steps = horizon;
        w.actual.assign(act.begin(), act.end());
        w.predicted = std::move(pred);
        windows.push_back(std::move(w));
    }
    return detail::score_windows(consumer_id, Task::DayAhead, policy, actual, std::move(windows));
}

/// Pointwise predictions (NaN where unavailable) from a direct model whose
/// inputs are all known 24 h ahead; every window slices the same vector.
inline EvalReport rolling_day_ahead(const std::string& consumer_id, std::span<const Timestamp> timestamps,
                                    std::span<const double> actual, std::span<const double> predicted,
                                    const ThresholdPolicy& policy) {
    if (predicted.size() != actual.size()) throw Error(ErrorKind::Data, "predictions and actuals differ in length");
    return rolling_day_ahead(consumer_id, timestamps, actual,
                             [&](std::size_t origin, std::size_t h) {
                                 return std::vector<double>(predicted.begin() + static_cast<long>(origin),
                                                            predicted.begin() + static_cast<long>(origin + h));
                             },
                             policy);
}

/// One 1-step window per test point that has both an actual and a forecast.
inline EvalReport rolling_15min(const std::string& consumer_id, std::span<const Timestamp> timestamps,
                                std::span<const double> actual, std::span<const double> predicted,
                                const ThresholdPolicy& policy) {
    if (timestamps.empty()) throw Error(ErrorKind::Span, "15-minute evaluation over an empty test span");
    if (timestamps.size() != actual.size() || predicted.size() != actual.size())
        throw Error(ErrorKind::Data, "timestamps, actuals and predictions differ in length");
    detail::check_grid(timestamps, Duration{900}, "rolling_15min");
    std::vector<ForecastWindow> windows;
    for (std::size_t k = 0; k < timestamps.size(); ++k) {
        if (!std::isfinite(actual[k]) || !std::isfinite(predicted[k])) continue;
        ForecastWindow w;
        w.issued_at = timestamps[k] - Duration{900};
        w.horizon_steps = 1;
        w.actual = {actual[k]};
        w.predicted = {predicted[k]};
        windows.push_back(std::move(w));
    }
    if (windows.empty()) throw Error(ErrorKind::Span, "15-minute evaluation has no scorable point");
    return detail::score_windows(consumer_id, Task::QuarterHour, policy, actual, std::move(windows));
}

/// Side-by-side comparison of two reports on the same consumer, task and
/// policy; deltas are b - a.
struct ReportComparison {
    std::string consumer_id;
    Task task = Task::DayAhead;
    std::string label_a, label_b;
    double mape_threshold = 0.0, mae_threshold = 0.0;
    double mape_a = 0.0, score_mape_a = 0.0, mape_b = 0.0, score_mape_b = 0.0;
    double mae_a = 0.0, score_mae_a = 0.0, mae_b = 0.0, score_mae_b = 0.0;

    double delta_mape() const { return mape_b - mape_a; }
    double delta_score_mape() const { return score_mape_b - score_mape_a; }
    double delta_mae() const { return mae_b - mae_a; }
    double delta_score_mae() const { return score_mae_b - score_mae_a; }
};

inline ReportComparison compare_reports(const EvalReport& a, const EvalReport& b, std::string label_a = "a",
                                        std::string label_b = "b") {
    if (a.consumer_id != b.consumer_id)
        throw Error(ErrorKind::Policy, "reports belong to different consumers ('" + a.consumer_id + "' vs '" +
                                           b.consumer_id + "')");
    if (a.task != b.task) throw Error(ErrorKind::Policy, "reports cover different tasks");
    if (!(a.policy == b.policy)) throw Error(ErrorKind::Policy, "reports were scored under different threshold policies");
    ReportComparison c;
    c.consumer_id = a.consumer_id;
    c.task = a.task;
    c.label_a = std::move(label_a);
    c.label_b = std::move(label_b);
    c.mape_threshold = a.mape_threshold;
    c.mae_threshold = a.mae_threshold;
    c.mape_a = a.aggregate_mape;
    c.score_mape_a = a.score_mape;
    c.mape_b = b.aggregate_mape;
    c.score_mape_b = b.score_mape;
    c.mae_a = a.aggregate_mae;
    c.score_mae_a = a.score_mae;
    c.mae_b = b.aggregate_mae;
    c.score_mae_b = b.score_mae;
    return c;
}

inline constexpr const char* kComparisonCsvHeader =
    "consumer,task,model_a,model_b,mape_threshold,mape_a,score_mape_a,mape_b,score_mape_b,delta_mape,delta_score_mape,"
    "mae_threshold,mae_a,score_mae_a,mae_b,score_mae_b,delta_mae,delta_score_mae";

inline void write_comparison_row(std::ostream& out, const ReportComparison& c) {
    out << c.consumer_id << ',' << to_string(c.task) << ',' << c.label_a << ',' << c.label_b << ','
        << format_double(c.mape_threshold) << ',' << format_double(c.mape_a) << ',' << format_double(c.score_mape_a) << ','
        << format_double(c.mape_b) << ',' << format_double(c.score_mape_b) << ',' << format_double(c.delta_mape()) << ','
        << format_double(c.delta_score_mape()) << ',' << format_double(c.mae_threshold) << ',' << format_double(c.mae_a)
        << ',' << format_double(c.score_mae_a) << ',' << format_double(c.mae_b) << ',' << format_double(c.score_mae_b)
        << ',' << format_double(c.delta_mae()) << ',' << format_double(c.delta_score_mae()) << '\n';
}

inline nlohmann::json policy_to_json(const ThresholdPolicy& p) {
    return {{"mape_thr_day", p.mape_thr_day},         {"mape_thr_15", p.mape_thr_15},
            {"mae_fraction_day", p.mae_fraction_day}, {"mae_fraction_15", p.mae_fraction_15},
            {"score_target_day", p.score_target_day}, {"score_target_15", p.score_target_15}};
}

inline ThresholdPolicy policy_from_json(const nlohmann::json& j, ThresholdPolicy p) {
    auto get = [&](const char* key, double& field) {
        if (j.contains(key)) field = j.at(key).get<double>();
    };
    get("mape_thr_day", p.mape_thr_day);
    get("mape_thr_15", p.mape_thr_15);
    get("mae_fraction_day", p.mae_fraction_day);
    get("mae_fraction_15", p.mae_fraction_15);
    get("score_target_day", p.score_target_day);
    get("score_target_15", p.score_target_15);
    p.validate();
    return p;
}

inline constexpr const char* kThresholdNote =
    "MAPE thresholds pair 20% with day-ahead and 15% with 15-minute forecasts; an alternative reading pairs the "
    "80%/85% accuracy targets the other way round";

inline nlohmann::json report_to_json(const EvalReport& r) {
    return {{"consumer_id", r.consumer_id},
            {"task", std::string(to_string(r.task))},
            {"policy", policy_to_json(r.policy)},
            {"threshold_note", kThresholdNote},
            {"mean_load_kw", r.mean_load},
            {"mape_threshold_pct", r.mape_threshold},
            {"mae_threshold_kw", r.mae_threshold},
            {"score_target_pct", r.score_target},
            {"windows", r.windows.size()},
            {"excluded_windows_zero_actual", r.excluded_windows},
            {"aggregate_mape_pct", r.aggregate_mape},
            {"aggregate_mae_kw", r.aggregate_mae},
            {"score_mape_pct", r.score_mape},
            {"score_mae_pct", r.score_mae},
            {"pass_mape", r.passes_mape()},
            {"pass_mae", r.passes_mae()},
            {"passed", r.passed()}};
}

inline void write_windows_csv(std::ostream& out, const EvalReport& r) {
    out << "issued_at,horizon_steps,mape_pct,mae_kw\n";
    for (const auto& w : r.windows)
        out << format_timestamp(w.issued_at) << ',' << w.horizon_steps << ','
            << (w.mape ? format_double(*w.mape) : std::string()) << ',' << format_double(w.mae) << '\n';
}

/// Line plot of window MAPE over issue time, holidays shaded, threshold dashed.
inline void write_mape_svg(std::ostream& out, const EvalReport& r, const std::function<bool(Timestamp)>& is_holiday) {
    constexpr double W = 900, H = 320, L = 60, R = 20, T = 30, B = 40;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << L << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" << r.consumer_id << " "
        << to_string(r.task) << " window MAPE (%)</text>\n";
    if (r.windows.empty()) {
        out << "</svg>\n";
        return;
    }
    double ymax = r.mape_threshold * 1.5;
    for (const auto& w : r.windows)
        if (w.mape) ymax = std::max(ymax, std::min(*w.mape, r.mape_threshold * 10.0));
    const double n = static_cast<double>(r.windows.size());
    auto x_of = [&](std::size_t i) { return L + (W - L - R) * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5); };
    auto y_of = [&](double v) { return T + (H - T - B) * (1.0 - std::min(v, ymax) / ymax); };
    const double bar = (W - L - R) / std::max(1.0, n - 1);

    std::size_t i = 0;
    while (i < r.windows.size()) {
        if (!is_holiday || !is_holiday(r.windows[i].issued_at + Duration{3600})) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < r.windows.size() && is_holiday(r.windows[j + 1].issued_at + Duration{3600})) ++j;
        out << "<rect x=\"" << format_double(x_of(i) - bar / 2) << "\" y=\"" << T << "\" width=\""
            << format_double(x_of(j) - x_of(i) + bar) << "\" height=\"" << H - T - B
            << "\" fill=\"#f4d03f\" fill-opacity=\"0.35\"/>\n";
        i = j + 1;
    }
    out << "<line x1=\"" << L << "\" y1=\"" << format_double(y_of(r.mape_threshold)) << "\" x2=\"" << W - R << "\" y2=\""
        << format_double(y_of(r.mape_threshold)) << "\" stroke=\"#c0392b\" stroke-dasharray=\"6,4\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"#2471a3\" stroke-width=\"1\" points=\"";
    for (std::size_t k = 0; k < r.windows.size(); ++k)
        if (r.windows[k].mape) out << format_double(x_of(k)) << ',' << format_double(y_of(*r.windows[k].mape)) << ' ';
    out << "\"/>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = ymax * k / 4.0;
        out << "<text x=\"" << L - 6 << "\" y=\"" << format_double(y_of(v) + 4)
            << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << std::lround(v) << "</text>\n";
    }
    out << "<text x=\"" << L << "\" y=\"" << H - 12 << "\" font-family=\"sans-serif\" font-size=\"10\">"
        << format_timestamp(r.windows.front().issued_at) << "</text>\n";
    out << "<text x=\"" << W - R << "\" y=\"" << H - 12
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">"
        << format_timestamp(r.windows.back().issued_at) << "</text>\n";
    out << "</svg>\n";
}

} // namespace loadfc
