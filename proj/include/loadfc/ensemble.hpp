#pragma once

#include "loadfc/error.hpp"
#include "loadfc/features.hpp"
#include "loadfc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace loadfc {

struct GBDTParams {
    std::size_t n_trees = 200;
    double learning_rate = 0.1;
    std::size_t max_leaves = 31;
    std::size_t min_samples_leaf = 20;
    double feature_fraction = 1.0;
    double row_subsample = 1.0;
    double l2_leaf_reg = 1.0;
    std::size_t n_bins = 64;
    std::uint64_t seed = 42;

    void validate() const {
        auto bad = [](const std::string& what) { throw Error(ErrorKind::Config, what); };
        if (n_trees < 1) bad("n_trees must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) bad("learning_rate must be in (0, 1]");
        if (max_leaves < 2) bad("max_leaves must be >= 2");
        if (min_samples_leaf < 1) bad("min_samples_leaf must be >= 1");
        if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) bad("feature_fraction must be in (0, 1]");
        if (!(row_subsample > 0.0 && row_subsample <= 1.0)) bad("row_subsample must be in (0, 1]");
        if (!(l2_leaf_reg >= 0.0)) bad("l2_leaf_reg must be >= 0");
        if (n_bins < 2 || n_bins > 255) bad("n_bins must be in [2, 255]");
    }

    bool operator==(const GBDTParams&) const = default;
};

enum class EnsembleMode { Boosted, Bagged };

inline std::string_view to_string(EnsembleMode m) { return m == EnsembleMode::Boosted ? "boosted" : "bagged"; }

/// Flat binary tree. Internal nodes send a row left when its value is
/// <= threshold (numeric) or its category bit is set in `category_mask`.
struct TreeNode {
    int feature = -1; // -1 marks a leaf
    bool categorical = false;
    double threshold = 0.0;
    std::uint64_t category_mask = 0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    static bool goes_left(const TreeNode& n, double x) {
        if (!n.categorical) return x <= n.threshold;
        if (!(x >= 0.0 && x < 64.0)) return false;
        return (n.category_mask >> static_cast<unsigned>(x)) & 1ULL;
    }

    double predict(std::span<const double> row) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf()) {
            const auto& n = nodes[i];
            i = static_cast<std::size_t>(goes_left(n, row[static_cast<std::size_t>(n.feature)]) ? n.left : n.right);
        }
        return nodes[i].value;
    }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
    }
};

struct TreeEnsembleModel {
    EnsembleMode mode = EnsembleMode::Boosted;
    GBDTParams params;
    double base_score = 0.0;
    std::vector<RegressionTree> trees;
    std::vector<std::string> features;
    std::vector<int> categories; // per feature, 0 = numeric
    std::vector<double> training_loss; // RMSE after each tree
    bool fitted = false;

    /// Boosted: base + lr * tree_1 + lr * tree_2 + ... (accumulated in order).
    /// Bagged: arithmetic mean of the tree outputs.
    double predict_row(std::span<const double> row) const {
        if (mode == EnsembleMode::Boosted) {
            double acc = base_score;
            for (const auto& t : trees) acc += params.learning_rate * t.predict(row);
            return acc;
        }
        double acc = 0.0;
        for (const auto& t : trees) acc += t.predict(row);
        return acc / static_cast<double>(trees.size());
    }
};

namespace detail {

struct BinnedData {
    std::size_t n = 0;
    std::size_t p = 0;
    std::size_t max_bins = 0;
    std::vector<std::uint8_t> bins; // column-major [feature][row]
    std::vector<std::size_t> bin_count;
    std::vector<std::vector<double>> thresholds; // numeric features: split point after bin k
    std::vector<int> categories;

    std::uint8_t bin(std::size_t f, std::size_t r) const { return bins[f * n + r]; }
};

// Upper split point strictly between a and b (a < b) such that a <= t < b.
inline double split_point(double a, double b) {
    const double mid = a + (b - a) / 2.0;
    return mid < b ? mid : a;
}

/// Equal-frequency split points over the distinct values of a column.
inline std::vector<double> quantile_thresholds(std::vector<double> values, std::size_t max_bins) {
    std::sort(values.begin(), values.end());
    std::vector<std::pair<double, std::size_t>> uniq;
    for (double v : values) {
        if (uniq.empty() || uniq.back().first != v) uniq.emplace_back(v, 1);
        else ++uniq.back().second;
    }
    std::vector<double> out;
    if (uniq.size() <= max_bins) {
        for (std::size_t i = 0; i + 1 < uniq.size(); ++i) out.push_back(split_point(uniq[i].first, uniq[i + 1].first));
        return out;
    }
    const double per_bin = static_cast<double>(values.size()) / static_cast<double>(max_bins);
    double next = per_bin;
    std::size_t cum = 0;
    for (std::size_t i = 0; i + 1 < uniq.size() && out.size() + 1 < max_bins; ++i) {
        cum += uniq[i].second;
        if (static_cast<double>(cum) >= next) {
            out.push_back(split_point(uniq[i].first, uniq[i + 1].first));
            while (next <= static_cast<double>(cum)) next += per_bin;
        }
    }
    return out;
}

inline BinnedData bin_matrix(const FeatureMatrix& m, std::size_t max_bins) {
    BinnedData b;
    b.n = m.rows();
    b.p = m.cols();
    b.bins.resize(b.n * b.p);
    b.bin_count.resize(b.p);
    b.thresholds.resize(b.p);
    b.categories = m.categories;
    if (b.categories.size() != b.p) b.categories.assign(b.p, 0);
    for (std::size_t f = 0; f < b.p; ++f) {
        std::vector<double> col = m.column(f);
        if (b.categories[f] > 0) {
            if (b.categories[f] > 64)
                throw Error(ErrorKind::Data, "categorical feature '" + m.columns[f] + "' has more than 64 categories");
            for (std::size_t r = 0; r < b.n; ++r) {
                const double v = col[r];
                if (!(v >= 0.0 && v < b.categories[f] && v == std::floor(v)))
                    throw Error(ErrorKind::Data, "categorical feature '" + m.columns[f] + "' has invalid code " +
                                                     std::to_string(v));
                b.bins[f * b.n + r] = static_cast<std::uint8_t>(v);
            }
            b.bin_count[f] = static_cast<std::size_t>(b.categories[f]);
        } else {
            b.thresholds[f] = quantile_thresholds(col, max_bins);
            const auto& th = b.thresholds[f];
            for (std::size_t r = 0; r < b.n; ++r) {
                // number of split points strictly below the value
                const auto k = std::lower_bound(th.begin(), th.end(), col[r]) - th.begin();
                b.bins[f * b.n + r] = static_cast<std::uint8_t>(k);
            }
            b.bin_count[f] = th.size() + 1;
        }
        b.max_bins = std::max(b.max_bins, b.bin_count[f]);
    }
    return b;
}

struct GrowConfig {
    std::size_t max_leaves = 31;
    std::size_t min_samples_leaf = 20;
    double lambda = 0.0;
    double split_feature_fraction = 1.0; // per-split feature sampling (bagged mode)
};

struct SplitChoice {
    bool valid = false;
    double gain = 0.0;
    std::size_t feature = 0;
    std::size_t bin = 0;     // numeric: left takes bins <= bin
    std::uint64_t mask = 0;  // categorical: left takes set bits
    double left_sum = 0.0;
    std::size_t left_count = 0;
};

class TreeGrower {
public:
    TreeGrower(const BinnedData& data, GrowConfig cfg) : data_(data), cfg_(cfg) {}

    /// Grows one tree best-first on `targets` restricted to `rows`, using the
    /// features in `features` (ascending).
    RegressionTree grow(std::span<const std::uint32_t> rows, std::span<const double> targets,
                        std::span<const std::size_t> features, Rng& rng) {
        targets_ = targets;
        features_ = features;
        RegressionTree tree;
        tree.nodes.emplace_back();

        std::vector<Leaf> leaves;
        Leaf root;
        root.node = 0;
        root.rows.assign(rows.begin(), rows.end());
        for (auto r : root.rows) root.sum += targets[r];
        root.count = root.rows.size();
        root.hist = build_histogram(root.rows);
        root.split = best_split(root, rng);
        leaves.push_back(std::move(root));

        while (leaves.size() < cfg_.max_leaves) {
            std::size_t pick = leaves.size();
            for (std::size_t i = 0; i < leaves.size(); ++i) {
                if (!leaves[i].split.valid) continue;
                if (pick == leaves.size() || leaves[i].split.gain > leaves[pick].split.gain ||
                    (leaves[i].split.gain == leaves[pick].split.gain && leaves[i].node < leaves[pick].node))
                    pick = i;
            }
            if (pick == leaves.size()) break;

            Leaf parent = std::move(leaves[pick]);
            leaves.erase(leaves.begin() + static_cast<long>(pick));
            const auto& s = parent.split;

            Leaf left, right;
            for (auto r : parent.rows) (goes_left(s, r) ? left.rows : right.rows).push_back(r);
            left.sum = s.left_sum;
            left.count = s.left_count;
            right.sum = parent.sum - s.left_sum;
            right.count = parent.count - s.left_count;

            Leaf& smaller = left.rows.size() <= right.rows.size() ? left : right;
            Leaf& larger = left.rows.size() <= right.rows.size() ? right : left;
            smaller.hist = build_histogram(smaller.rows);
            larger.hist = std::move(parent.hist);
            for (std::size_t k = 0; k < larger.hist.sum.size(); ++k) {
                larger.hist.sum[k] -= smaller.hist.sum[k];
                larger.hist.count[k] -= smaller.hist.count[k];
            }

            TreeNode& pn = tree.nodes[parent.node];
            pn.feature = static_cast<int>(s.feature);
            pn.categorical = data_.categories[s.feature] > 0;
            if (pn.categorical) pn.category_mask = s.mask;
            else pn.threshold = data_.thresholds[s.feature][s.bin];
            left.node = tree.nodes.size();
            right.node = tree.nodes.size() + 1;
            tree.nodes[parent.node].left = static_cast<int>(left.node);
            tree.nodes[parent.node].right = static_cast<int>(right.node);
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();

            left.split = best_split(left, rng);
            right.split = best_split(right, rng);
            leaves.push_back(std::move(left));
            leaves.push_back(std::move(right));
        }

        for (const auto& leaf : leaves)
            tree.nodes[leaf.node].value = leaf.count ? leaf.sum / (static_cast<double>(leaf.count) + cfg_.lambda) : 0.0;
        return tree;
    }

private:
    struct Histogram {
        std::vector<double> sum;
        std::vector<std::int64_t> count;
    };

    struct Leaf {
        std::size_t node = 0;
        std::vector<std::uint32_t> rows;
        double sum = 0.0;
        std::size_t count = 0;
        Histogram hist;
        SplitChoice split;
    };

    bool goes_left(const SplitChoice& s, std::uint32_t r) const {
        const auto b = data_.bin(s.feature, r);
        if (data_.categories[s.feature] > 0) return (s.mask >> b) & 1ULL;
        return b <= s.bin;
    }

    Histogram build_histogram(const std::vector<std::uint32_t>& rows) const {
        Histogram h;
        h.sum.assign(data_.p * data_.max_bins, 0.0);
        h.count.assign(data_.p * data_.max_bins, 0);
        for (auto f : features_) {
            const std::uint8_t* col = data_.bins.data() + f * data_.n;
            double* hs = h.sum.data() + f * data_.max_bins;
            std::int64_t* hc = h.count.data() + f * data_.max_bins;
            for (auto r : rows) {
                hs[col[r]] += targets_[r];
                ++hc[col[r]];
            }
        }
        return h;
    }

    double score(double sum, double count) const { return sum * sum / (count + cfg_.lambda); }

    SplitChoice best_split(const Leaf& leaf, Rng& rng) const {
        SplitChoice best;
        if (leaf.count < 2 * cfg_.min_samples_leaf) return best;

        std::vector<std::size_t> candidates(features_.begin(), features_.end());
        if (cfg_.split_feature_fraction < 1.0 && candidates.size() > 1) {
            const auto keep = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::lround(cfg_.split_feature_fraction * static_cast<double>(candidates.size()))));
            rng.shuffle(candidates.begin(), candidates.end());
            candidates.resize(keep);
            std::sort(candidates.begin(), candidates.end());
        }

        const double total = static_cast<double>(leaf.count);
        const double parent_score = score(leaf.sum, total);
        const double min_leaf = static_cast<double>(cfg_.min_samples_leaf);
        auto consider = [&](std::size_t f, double lsum, double lcount, std::size_t bin, std::uint64_t mask) {
            const double rcount = total - lcount;
            if (lcount < min_leaf || rcount < min_leaf) return;
            const double gain = score(lsum, lcount) + score(leaf.sum - lsum, rcount) - parent_score;
            if (!(gain > 1e-12 * (1.0 + std::abs(parent_score)))) return;
            if (!best.valid || gain > best.gain) {
                best = {true, gain, f, bin, mask, lsum, static_cast<std::size_t>(lcount)};
            }
        };

        for (auto f : candidates) {
            const double* hs = leaf.hist.sum.data() + f * data_.max_bins;
            const std::int64_t* hc = leaf.hist.count.data() + f * data_.max_bins;
            const std::size_t nb = data_.bin_count[f];
            if (data_.categories[f] > 0) {
                // order present categories by mean target, then scan prefixes
                std::vector<std::size_t> present;
                for (std::size_t c = 0; c < nb; ++c)
                    if (hc[c] > 0) present.push_back(c);
                std::stable_sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
                    return hs[a] / static_cast<double>(hc[a]) < hs[b] / static_cast<double>(hc[b]);
                });
                double lsum = 0.0, lcount = 0.0;
                std::uint64_t mask = 0;
                for (std::size_t j = 0; j + 1 < present.size(); ++j) {
                    lsum += hs[present[j]];
                    lcount += static_cast<double>(hc[present[j]]);
                    mask |= 1ULL << present[j];
                    consider(f, lsum, lcount, 0, mask);
                }
            } else {
                double lsum = 0.0, lcount = 0.0;
                for (std::size_t k = 0; k + 1 < nb; ++k) {
                    lsum += hs[k];
                    lcount += static_cast<double>(hc[k]);
                    if (hc[k] == 0) continue; // same partition as the previous threshold
                    consider(f, lsum, lcount, k, 0);
                }
            }
        }
        return best;
    }

    const BinnedData& data_;
    GrowConfig cfg_;
    std::span<const double> targets_;
    std::span<const std::size_t> features_;
};

inline std::vector<std::size_t> sample_features(std::size_t p, double fraction, Rng& rng) {
    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (fraction >= 1.0) return all;
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(p))));
    rng.shuffle(all.begin(), all.end());
    all.resize(keep);
    std::sort(all.begin(), all.end());
    return all;
}

inline void check_finite(const FeatureMatrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        if (!std::isfinite(m.target[r]))
            throw Error(ErrorKind::Data, "non-finite target at row " + std::to_string(r));
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (!std::isfinite(m.at(r, c)))
                throw Error(ErrorKind::Data, "non-finite value in feature '" + m.columns[c] + "' at row " + std::to_string(r));
    }
}

inline double rmse(std::span<const double> y, std::span<const double> pred) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += (y[i] - pred[i]) * (y[i] - pred[i]);
    return std::sqrt(acc / static_cast<double>(y.size()));
}

} // namespace detail

/// Fits a boosted (squared loss on residuals) or bagged (bootstrap forest)
/// ensemble with histogram split search.
inline TreeEnsembleModel fit_ensemble(const GBDTParams& params, EnsembleMode mode, const FeatureMatrix& m) {
    params.validate();
    if (m.rows() == 0) throw Error(ErrorKind::Data, "cannot fit an ensemble on an empty matrix");
    if (m.rows() < params.min_samples_leaf)
        throw Error(ErrorKind::Data, "matrix has " + std::to_string(m.rows()) + " rows, fewer than min_samples_leaf");
    if (m.rows() > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorKind::Data, "too many rows");
    detail::check_finite(m);

    const auto data = detail::bin_matrix(m, params.n_bins);
    const std::size_t n = m.rows();
    Rng rng(derive_seed(params.seed, "ensemble"));

    TreeEnsembleModel model;
    model.mode = mode;
    model.params = params;
    model.features = m.columns;
    model.categories = data.categories;

    std::vector<double> pred(n);
    std::vector<double> work(n);
    std::vector<std::uint32_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0u);

    if (mode == EnsembleMode::Boosted) {
        model.base_score = std::accumulate(m.target.begin(), m.target.end(), 0.0) / static_cast<double>(n);
        std::fill(pred.begin(), pred.end(), model.base_score);
        detail::TreeGrower grower(data, {params.max_leaves, params.min_samples_leaf, params.l2_leaf_reg, 1.0});
        for (std::size_t t = 0; t < params.n_trees; ++t) {
            for (std::size_t r = 0; r < n; ++r) work[r] = m.target[r] - pred[r];
            std::vector<std::uint32_t> rows = all_rows;
            if (params.row_subsample < 1.0) {
                const auto keep = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::lround(params.row_subsample * static_cast<double>(n))));
                for (std::size_t i = 0; i < keep; ++i) std::swap(rows[i], rows[i + rng.below(n - i)]);
                rows.resize(keep);
                std::sort(rows.begin(), rows.end());
            }
            const auto feats = detail::sample_features(m.cols(), params.feature_fraction, rng);
            model.trees.push_back(grower.grow(rows, work, feats, rng));
            const auto& tree = model.trees.back();
            for (std::size_t r = 0; r < n; ++r) pred[r] += params.learning_rate * tree.predict(m.row(r));
            model.training_loss.push_back(detail::rmse(m.target, pred));
        }
    } else {
        model.base_score = 0.0;
        detail::TreeGrower grower(data, {params.max_leaves, params.min_samples_leaf, 0.0, params.feature_fraction});
        std::vector<double> sum(n, 0.0);
        const auto bag = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(params.row_subsample * static_cast<double>(n))));
        const std::vector<std::size_t> feats = detail::sample_features(m.cols(), 1.0, rng);
        for (std::size_t t = 0; t < params.n_trees; ++t) {
            std::vector<std::uint32_t> rows(bag);
            for (auto& r : rows) r = static_cast<std::uint32_t>(rng.below(n));
            std::sort(rows.begin(), rows.end());
            model.trees.push_back(grower.grow(rows, m.target, feats, rng));
            const auto& tree = model.trees.back();
            for (std::size_t r = 0; r < n; ++r) {
                sum[r] += tree.predict(m.row(r));
                pred[r] = sum[r] / static_cast<double>(t + 1);
            }
            model.training_loss.push_back(detail::rmse(m.target, pred));
        }
    }
    model.fitted = true;
    return model;
}

/// Predictions for every row of `m`; columns are matched to the model's
/// features by name.
inline std::vector<double> predict_ensemble(const TreeEnsembleModel& model, const FeatureMatrix& m) {
    if (!model.fitted) throw Error(ErrorKind::Config, "model is not fitted");
    std::vector<std::size_t> map(model.features.size());
    bool identity = m.cols() == model.features.size();
    for (std::size_t j = 0; j < model.features.size(); ++j) {
        const auto idx = m.column_index(model.features[j]);
        if (!idx) throw Error(ErrorKind::Schema, "input lacks model feature '" + model.features[j] + "'");
        map[j] = *idx;
        identity = identity && *idx == j;
    }
    std::vector<double> out(m.rows());
    std::vector<double> row(model.features.size());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        if (identity) {
            out[r] = model.predict_row(m.row(r));
            continue;
        }
        for (std::size_t j = 0; j < map.size(); ++j) row[j] = m.at(r, map[j]);
        out[r] = model.predict_row(row);
    }
    return out;
}

} // namespace loadfc
