#pragma once

#include "loadfc/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

namespace loadfc {

/// Chronological train / validation / test cut points over `n` rows.
struct SplitFractions {
    double train = 0.70;
    double validation = 0.15;
    double test = 0.15;

    void validate() const {
        if (!(train > 0.0) || validation < 0.0 || test < 0.0 || std::abs(train + validation + test - 1.0) > 1e-9)
            throw Error(ErrorKind::Config, "split fractions must be non-negative, train > 0, and sum to 1");
    }
};

struct RowSplit {
    std::size_t train_end = 0; // [0, train_end)
    std::size_t val_end = 0;   // [train_end, val_end); test is [val_end, n)
    std::size_t n = 0;
};

inline RowSplit chronological_split(std::size_t n, const SplitFractions& f) {
    f.validate();
    RowSplit s;
    s.n = n;
    s.train_end = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.train));
    s.val_end = std::min(n, s.train_end + static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.validation)));
    return s;
}

} // namespace loadfc
