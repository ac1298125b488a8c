#pragma once

#include "loadfc/error.hpp"

#include <cmath>
#include <span>
#include <string>

namespace loadfc {

namespace detail {

inline void check_lengths(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size())
        throw Error(ErrorKind::Metric, "length mismatch: " + std::to_string(actual.size()) + " actual vs " +
                                           std::to_string(predicted.size()) + " predicted");
    if (actual.empty()) throw Error(ErrorKind::Metric, "metric of an empty vector");
}

} // namespace detail

/// Mean absolute percentage error in percent. Undefined when any actual is 0.
inline double mape(std::span<const double> actual, std::span<const double> predicted) {
    detail::check_lengths(actual, predicted);
    double acc = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] == 0.0) throw Error(ErrorKind::Metric, "MAPE undefined: actual value 0 at index " + std::to_string(i));
        acc += std::abs((actual[i] - predicted[i]) / actual[i]);
    }
    return 100.0 * acc / static_cast<double>(actual.size());
}

/// Mean absolute error, in the unit of the inputs (kW).
inline double mae(std::span<const double> actual, std::span<const double> predicted) {
    detail::check_lengths(actual, predicted);
    double acc = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) acc += std::abs(actual[i] - predicted[i]);
    return acc / static_cast<double>(actual.size());
}

inline double rmse(std::span<const double> actual, std::span<const double> predicted) {
    detail::check_lengths(actual, predicted);
    double acc = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) acc += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    return std::sqrt(acc / static_cast<double>(actual.size()));
}

/// Percentage of values strictly below `threshold`; 0 for an empty input.
inline double quantitative_score(std::span<const double> values, double threshold) {
    if (values.empty()) return 0.0;
    std::size_t below = 0;
    for (double v : values)
        if (v < threshold) ++below;
    return 100.0 * static_cast<double>(below) / static_cast<double>(values.size());
}

} // namespace loadfc
