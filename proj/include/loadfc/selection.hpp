#pragma once

#include "loadfc/ensemble.hpp"
#include "loadfc/features.hpp"
#include "loadfc/io.hpp"
#include "loadfc/metrics.hpp"
#include "loadfc/parallel.hpp"
#include "loadfc/rng.hpp"
#include "loadfc/split.hpp"

#include "json.hpp"

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace loadfc {

/// A named tree-ensemble configuration taking part in the ablation.
struct ModelConfig {
    std::string name;
    GBDTParams params;
    EnsembleMode mode = EnsembleMode::Boosted;
};

/// Two boosted configurations with different growth budgets: a wide
/// leaf-wise learner and a shallow, row-subsampled one. Neither samples
/// columns, so a duplicate of a base column cannot change the fit.
inline std::vector<ModelConfig> default_ablation_models(std::uint64_t seed = 42) {
    ModelConfig wide{"gbdt-leafwise", {}, EnsembleMode::Boosted};
    wide.params.n_trees = 120;
    wide.params.learning_rate = 0.1;
    wide.params.max_leaves = 31;
    wide.params.min_samples_leaf = 20;
    wide.params.seed = derive_seed(seed, "gbdt-leafwise");
    ModelConfig shallow{"gbdt-shallow", {}, EnsembleMode::Boosted};
    shallow.params.n_trees = 120;
    shallow.params.learning_rate = 0.15;
    shallow.params.max_leaves = 8;
    shallow.params.min_samples_leaf = 40;
    shallow.params.row_subsample = 0.8;
    shallow.params.seed = derive_seed(seed, "gbdt-shallow");
    return {wide, shallow};
}

struct AblationProtocol {
    std::vector<ModelConfig> models = default_ablation_models();
    double epsilon = 0.005; // relative error reduction a feature must beat
    SplitFractions split;
    std::size_t horizon = 24;
    std::size_t jobs = 1;

    void validate() const {
        if (models.size() < 2) throw Error(ErrorKind::Config, "ablation needs at least two model configurations");
        if (!(epsilon >= 0.0)) throw Error(ErrorKind::Config, "epsilon must be >= 0");
        split.validate();
        if (split.validation <= 0.0) throw Error(ErrorKind::Config, "ablation needs a validation split");
        for (const auto& m : models) m.params.validate();
    }
};

enum class ErrorMetric { Mape, Mae, Rmse };

inline std::string_view to_string(ErrorMetric m) {
    switch (m) {
    case ErrorMetric::Mape: return "MAPE";
    case ErrorMetric::Mae: return "MAE";
    case ErrorMetric::Rmse: return "RMSE";
    }
    return "?";
}

inline ErrorMetric error_metric_from_string(std::string_view s) {
    if (s == "MAPE" || s == "mape") return ErrorMetric::Mape;
    if (s == "MAE" || s == "mae") return ErrorMetric::Mae;
    if (s == "RMSE" || s == "rmse") return ErrorMetric::Rmse;
    throw Error(ErrorKind::Config, "unknown metric '" + std::string(s) + "'");
}

/// MAPE over the points with a non-zero actual; MAE and RMSE over all points.
inline double error_of(ErrorMetric m, std::span<const double> actual, std::span<const double> predicted) {
    if (m == ErrorMetric::Mae) return mae(actual, predicted);
    if (m == ErrorMetric::Rmse) return rmse(actual, predicted);
    std::vector<double> a, p;
    for (std::size_t i = 0; i < actual.size(); ++i)
        if (actual[i] != 0.0) {
            a.push_back(actual[i]);
            p.push_back(predicted[i]);
        }
    if (a.empty()) throw Error(ErrorKind::Metric, "MAPE undefined: every actual is 0");
    return mape(a, p);
}

struct AblationCell {
    std::string feature;
    std::string model;
    ErrorMetric metric = ErrorMetric::Mape;
    double base_error = 0.0; // e_u, validation error without the feature
    double with_error = 0.0; // e_i, validation error with it
    bool valid = true;
    std::string failure;

    double delta() const { return with_error - base_error; }
    double relative_delta() const { return base_error != 0.0 ? delta() / base_error : 0.0; }
};

inline constexpr const char* kAblationNote =
    "base set = target lags only; each candidate covariate is added to the base on its own and kept when the mean "
    "relative validation error change across models and metrics is below -epsilon";

struct FeatureAblationReport {
    std::string note = kAblationNote;
    double epsilon = 0.005;
    FeatureSpec base;
    std::vector<std::string> candidates;
    std::vector<AblationCell> cells; // canonical order: candidate, model, metric
    FeatureSpec selected;            // base followed by the kept candidates
    std::vector<std::string> kept;

    /// Mean relative delta of a candidate over its valid cells, if any.
    std::optional<double> mean_relative_delta(const std::string& feature) const {
        double acc = 0.0;
        std::size_t n = 0;
        for (const auto& c : cells)
            if (c.feature == feature && c.valid) {
                acc += c.relative_delta();
                ++n;
            }
        if (n == 0) return std::nullopt;
        return acc / static_cast<double>(n);
    }
};

/// Columns of `m` belonging to the named features ("name" or one-hot
/// "name=<k>"), in the given feature order.
inline std::vector<std::size_t> feature_columns(const FeatureMatrix& m, const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    for (const auto& n : names) {
        const auto before = idx.size();
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (m.columns[c] == n || m.columns[c].rfind(n + "=", 0) == 0) idx.push_back(c);
        if (idx.size() == before) throw Error(ErrorKind::Schema, "matrix has no column for feature '" + n + "'");
    }
    return idx;
}

inline FeatureMatrix select_columns(const FeatureMatrix& m, std::span<const std::size_t> cols) {
    FeatureMatrix out;
    out.timestamps = m.timestamps;
    out.source_rows = m.source_rows;
    out.target = m.target;
    for (auto c : cols) {
        out.columns.push_back(m.columns[c]);
        out.categories.push_back(m.categories[c]);
    }
    out.data.reserve(m.rows() * cols.size());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (auto c : cols) out.data.push_back(m.at(r, c));
    return out;
}

inline FeatureMatrix row_range(const FeatureMatrix& m, std::size_t first, std::size_t last) {
    std::vector<std::size_t> idx;
    for (std::size_t r = first; r < last; ++r) idx.push_back(r);
    return m.select_rows(idx);
}

/// Single-feature ablation: each candidate is trained with and without it on
/// the training split under every registered configuration, scored on the
/// validation split. A failed fit marks its cells invalid; selection then
/// uses the remaining cells of that candidate.
inline FeatureAblationReport ablate_features(const FeatureSpec& candidates, const FeatureSpec& base,
                                             const AlignedTable& data, const AblationProtocol& protocol) {
    protocol.validate();
    base.validate();
    FeatureAblationReport rep;
    rep.epsilon = protocol.epsilon;
    rep.base = base;
    rep.selected = base;
    for (const auto& c : candidates.features) {
        if (base.contains(c.name)) throw Error(ErrorKind::Config, "candidate '" + c.name + "' is already in the base set");
        rep.candidates.push_back(c.name);
    }
    if (candidates.features.empty()) return rep;

    FeatureSpec full = base;
    for (const auto& c : candidates.features) full = full.with(c);

    // weather scaling comes from the training share of the table only
    const auto table_split = chronological_split(data.size(), protocol.split);
    BuildOptions opts;
    const bool needs_scaling = std::any_of(full.features.begin(), full.features.end(),
                                           [](const auto& f) { return f.encoding == Encoding::Standardized; });
    if (needs_scaling) opts.scaling = fit_weather_scaling(data, table_split.train_end);
    const auto matrix = build_matrix(data, full, protocol.horizon, opts);
    const auto split = chronological_split(matrix.rows(), protocol.split);
    if (split.train_end == 0 || split.val_end <= split.train_end)
        throw Error(ErrorKind::InsufficientData, "matrix of " + std::to_string(matrix.rows()) +
                                                     " rows leaves no training or validation rows");
    const auto train = row_range(matrix, 0, split.train_end);
    const auto val = row_range(matrix, split.train_end, split.val_end);

    std::vector<std::string> base_names;
    for (const auto& f : base.features) base_names.push_back(f.name);

    const std::size_t n_models = protocol.models.size();
    const std::size_t n_cand = candidates.features.size();
    constexpr ErrorMetric kMetrics[] = {ErrorMetric::Mape, ErrorMetric::Mae};

    // job 0..n_models-1: base fits; then one job per (candidate, model)
    struct Outcome {
        bool ok = false;
        double err[2] = {0.0, 0.0};
        std::string failure;
    };
    std::vector<Outcome> outcomes(n_models * (n_cand + 1));
    parallel_for(outcomes.size(), protocol.jobs, [&](std::size_t job) {
        const std::size_t model = job % n_models;
        const std::size_t slot = job / n_models; // 0 = base, k = candidate k-1
        auto names = base_names;
        if (slot > 0) names.push_back(candidates.features[slot - 1].name);
        Outcome& out = outcomes[job];
        try {
            const auto cols = feature_columns(matrix, names);
            const auto& cfg = protocol.models[model];
            const auto fitted = fit_ensemble(cfg.params, cfg.mode, select_columns(train, cols));
            const auto pred = predict_ensemble(fitted, select_columns(val, cols));
            for (std::size_t k = 0; k < 2; ++k) out.err[k] = error_of(kMetrics[k], val.target, pred);
            out.ok = true;
        } catch (const Error& e) {
            out.failure = e.what();
        }
    });

    for (std::size_t c = 0; c < n_cand; ++c)
        for (std::size_t model = 0; model < n_models; ++model) {
            const auto& b = outcomes[model];
            const auto& w = outcomes[(c + 1) * n_models + model];
            for (std::size_t k = 0; k < 2; ++k) {
                AblationCell cell;
                cell.feature = candidates.features[c].name;
                cell.model = protocol.models[model].name;
                cell.metric = kMetrics[k];
                cell.valid = b.ok && w.ok;
                cell.base_error = b.err[k];
                cell.with_error = w.err[k];
                if (!b.ok) cell.failure = b.failure;
                else if (!w.ok) cell.failure = w.failure;
                rep.cells.push_back(cell);
            }
        }

    for (const auto& c : candidates.features) {
        const auto d = rep.mean_relative_delta(c.name);
        if (d && *d < -protocol.epsilon) {
            rep.selected = rep.selected.with(c);
            rep.kept.push_back(c.name);
        }
    }
    return rep;
}

inline void write_ablation_csv(std::ostream& out, const FeatureAblationReport& r) {
    out << "# " << r.note << "; epsilon " << format_double(r.epsilon) << "\n";
    out << "feature,model,metric,base_error,with_error,delta,relative_delta,valid\n";
    for (const auto& c : r.cells) {
        out << c.feature << ',' << c.model << ',' << to_string(c.metric) << ',';
        if (c.valid)
            out << format_double(c.base_error) << ',' << format_double(c.with_error) << ',' << format_double(c.delta())
                << ',' << format_double(c.relative_delta()) << ",1\n";
        else
            out << ",,,,0\n";
    }
}

inline nlohmann::json feature_spec_to_json(const FeatureSpec& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : s.features) {
        nlohmann::json j = {{"name", f.name}, {"kind", to_string(f.kind)}, {"encoding", to_string(f.encoding)}};
        if (f.kind == FeatureKind::TargetLag) j["lag"] = f.lag;
        if (!f.source.empty()) j["source"] = f.source;
        arr.push_back(j);
    }
    return {{"features", arr}};
}

inline FeatureSpec feature_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("features") || !j["features"].is_array())
        throw Error(ErrorKind::Schema, "feature spec needs a 'features' array");
    FeatureSpec s;
    try {
        for (const auto& f : j["features"]) {
            FeatureDescriptor d;
            d.name = f.at("name").get<std::string>();
            d.kind = feature_kind_from_string(f.at("kind").get<std::string>());
            d.encoding = encoding_from_string(f.at("encoding").get<std::string>());
            d.lag = f.value("lag", std::size_t{0});
            d.source = f.value("source", std::string{});
            s.features.push_back(d);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("feature spec: ") + e.what());
    }
    s.validate();
    return s;
}

inline nlohmann::json ablation_to_json(const FeatureAblationReport& r) {
    nlohmann::json mean = nlohmann::json::object();
    for (const auto& c : r.candidates) {
        const auto d = r.mean_relative_delta(c);
        mean[c] = d ? nlohmann::json(*d) : nlohmann::json(nullptr);
    }
    return {{"note", r.note},
            {"epsilon", r.epsilon},
            {"candidates", r.candidates},
            {"mean_relative_delta", mean},
            {"kept", r.kept},
            {"selected", feature_spec_to_json(r.selected)}};
}

/// Mean increase of `metric` over `repeats` within-column shuffles, one value
/// per model feature (model order). Columns are matched to the matrix by name.
inline std::vector<double> permutation_importance(const TreeEnsembleModel& model, const FeatureMatrix& m,
                                                  ErrorMetric metric, std::size_t repeats, std::uint64_t seed) {
    if (m.rows() < 2) throw Error(ErrorKind::InsufficientData, "permutation importance needs at least 2 rows");
    if (repeats < 1) throw Error(ErrorKind::Config, "repeats must be >= 1");
    std::vector<std::size_t> cols;
    for (const auto& f : model.features) {
        const auto c = m.column_index(f);
        if (!c) throw Error(ErrorKind::Schema, "matrix lacks model feature '" + f + "'");
        cols.push_back(*c);
    }
    FeatureMatrix work = select_columns(m, cols);
    const double base = error_of(metric, work.target, predict_ensemble(model, work));
    std::vector<double> out(cols.size(), 0.0);
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto original = work.column(j);
        double acc = 0.0;
        for (std::size_t k = 0; k < repeats; ++k) {
            Rng rng(derive_seed(derive_seed(seed, model.features[j]), static_cast<std::uint64_t>(k)));
            auto shuffled = original;
            rng.shuffle(shuffled.begin(), shuffled.end());
            for (std::size_t r = 0; r < work.rows(); ++r) work.data[r * work.cols() + j] = shuffled[r];
            acc += error_of(metric, work.target, predict_ensemble(model, work)) - base;
        }
        for (std::size_t r = 0; r < work.rows(); ++r) work.data[r * work.cols() + j] = original[r];
        out[j] = acc / static_cast<double>(repeats);
    }
    return out;
}

} // namespace loadfc
