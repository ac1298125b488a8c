#pragma once

#include "loadfc/ensemble.hpp"
#include "loadfc/error.hpp"
#include "loadfc/io.hpp"
#include "loadfc/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace loadfc {

enum class DomainKind { Continuous, Integer, Categorical };

struct ParamDomain {
    std::string name;
    DomainKind kind = DomainKind::Continuous;
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;                 // continuous only
    std::vector<std::string> choices; // categorical only

    static ParamDomain continuous(std::string name, double lo, double hi, bool log = false) {
        return {std::move(name), DomainKind::Continuous, lo, hi, log, {}};
    }
    static ParamDomain integer(std::string name, long lo, long hi) {
        return {std::move(name), DomainKind::Integer, static_cast<double>(lo), static_cast<double>(hi), false, {}};
    }
    static ParamDomain categorical(std::string name, std::vector<std::string> choices) {
        const double n = static_cast<double>(choices.size());
        return {std::move(name), DomainKind::Categorical, 0.0, n - 1.0, false, std::move(choices)};
    }
};

/// An assignment holds one value per domain, in space order. Categorical
/// values are choice indices.
using Assignment = std::vector<double>;

struct SearchSpace {
    std::vector<ParamDomain> params;

    void validate() const {
        if (params.empty()) throw Error(ErrorKind::Config, "search space is empty");
        for (const auto& p : params) {
            if (p.kind == DomainKind::Categorical) {
                if (p.choices.empty()) throw Error(ErrorKind::Config, "categorical '" + p.name + "' has no choices");
                continue;
            }
            if (!(p.lo < p.hi)) throw Error(ErrorKind::Config, "domain '" + p.name + "' needs lo < hi");
            if (p.log && !(p.lo > 0.0)) throw Error(ErrorKind::Config, "log domain '" + p.name + "' needs lo > 0");
            if (p.kind == DomainKind::Integer && (p.lo != std::floor(p.lo) || p.hi != std::floor(p.hi)))
                throw Error(ErrorKind::Config, "integer domain '" + p.name + "' has fractional bounds");
        }
    }

    bool contains(const Assignment& x) const {
        if (x.size() != params.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto& p = params[i];
            if (!std::isfinite(x[i]) || x[i] < p.lo || x[i] > p.hi) return false;
            if (p.kind != DomainKind::Continuous && x[i] != std::floor(x[i])) return false;
        }
        return true;
    }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params[i].name == name) return i;
        throw Error(ErrorKind::Config, "search space has no parameter '" + name + "'");
    }
};

struct Trial {
    std::size_t index = 0;
    Assignment x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    std::string error;
};

struct TPEConfig {
    std::size_t n_startup = 10;
    double gamma = 0.25;
    std::size_t n_candidates = 24;
    double prior_weight = 1.0;          // weight of the flat prior kernel
    double categorical_pseudo_count = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorKind::Config, "gamma must be in (0, 1)");
        if (n_candidates < 1) throw Error(ErrorKind::Config, "n_candidates must be >= 1");
        if (!(prior_weight > 0.0)) throw Error(ErrorKind::Config, "prior_weight must be > 0");
        if (!(categorical_pseudo_count > 0.0)) throw Error(ErrorKind::Config, "pseudo-count must be > 0");
    }
};

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Working coordinates: log scale for log domains, integers widened by half a
// step so rounding gives every value equal mass.
inline double work_lo(const ParamDomain& p) {
    if (p.kind == DomainKind::Integer) return p.lo - 0.5;
    return p.log ? std::log(p.lo) : p.lo;
}
inline double work_hi(const ParamDomain& p) {
    if (p.kind == DomainKind::Integer) return p.hi + 0.5;
    return p.log ? std::log(p.hi) : p.hi;
}
inline double to_work(const ParamDomain& p, double v) { return p.log ? std::log(v) : v; }

inline double from_work(const ParamDomain& p, double w) {
    if (p.kind == DomainKind::Integer) return std::clamp(std::round(w), p.lo, p.hi);
    const double v = p.log ? std::exp(w) : w;
    return std::clamp(v, p.lo, p.hi);
}

/// Mixture of Gaussians truncated to [lo, hi]: one kernel per observation
/// (Scott-style bandwidth) plus a wide prior kernel centred on the domain.
class TruncatedKde {
public:
    // `sd` is the spread of every ok observation in this dimension; l and g
    // share one bandwidth so the ratio is not dominated by a tight good set.
    TruncatedKde(const std::vector<double>& obs, double lo, double hi, double prior_weight, std::size_t n_total, double sd)
        : lo_(lo), hi_(hi) {
        const double width = hi - lo;
        const double n = static_cast<double>(std::max<std::size_t>(n_total, 1));
        // floor shrinks with the number of trials so a tight cluster keeps exploring nearby
        const double floor_bw = width / std::min(100.0, 1.0 + n);
        const double bw = std::clamp(sd * std::pow(n, -0.2), floor_bw, width);
        for (double o : obs) kernels_.push_back({o, bw, 1.0});
        kernels_.push_back({0.5 * (lo + hi), width, prior_weight});
        double total = 0.0;
        for (auto& k : kernels_) {
            k.mass = normal_cdf((hi_ - k.mu) / k.sd) - normal_cdf((lo_ - k.mu) / k.sd);
            total += k.weight;
        }
        for (auto& k : kernels_) k.weight /= total;
    }

    double sample(Rng& rng) const {
        double u = rng.uniform();
        std::size_t i = 0;
        while (i + 1 < kernels_.size() && u >= kernels_[i].weight) u -= kernels_[i++].weight;
        const auto& k = kernels_[i];
        for (int attempt = 0; attempt < 100; ++attempt) {
            const double v = rng.normal(k.mu, k.sd);
            if (v >= lo_ && v <= hi_) return v;
        }
        return std::clamp(k.mu, lo_, hi_);
    }

    double log_pdf(double x) const {
        double p = 0.0;
        for (const auto& k : kernels_) {
            const double z = (x - k.mu) / k.sd;
            p += k.weight * std::exp(-0.5 * z * z) / (k.sd * std::sqrt(2.0 * std::numbers::pi) * k.mass);
        }
        return std::log(std::max(p, 1e-300));
    }

private:
    struct Kernel {
        double mu, sd, weight;
        double mass = 1.0;
    };
    double lo_, hi_;
    std::vector<Kernel> kernels_;
};

inline std::vector<double> category_weights(const std::vector<double>& obs, std::size_t n, double pseudo) {
    std::vector<double> w(n, pseudo);
    for (double o : obs) w[static_cast<std::size_t>(o)] += 1.0;
    double total = 0.0;
    for (double v : w) total += v;
    for (auto& v : w) v /= total;
    return w;
}

inline Assignment uniform_draw(const SearchSpace& space, Rng& rng) {
    Assignment x;
    for (const auto& p : space.params) {
        if (p.kind == DomainKind::Categorical) x.push_back(static_cast<double>(rng.below(p.choices.size())));
        else x.push_back(from_work(p, rng.uniform(work_lo(p), work_hi(p))));
    }
    return x;
}

} // namespace detail

/// Next assignment to evaluate. Uniform draws until `n_startup` ok trials
/// exist (or when every ok objective is equal); afterwards the candidate from
/// the good-set density with the largest l(x)/g(x).
inline Assignment suggest(const std::vector<Trial>& history, const SearchSpace& space, const TPEConfig& cfg) {
    space.validate();
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(history.size())));

    std::vector<const Trial*> ok;
    for (const auto& t : history)
        if (t.ok) ok.push_back(&t);
    if (ok.size() < cfg.n_startup || ok.empty()) return detail::uniform_draw(space, rng);
    std::stable_sort(ok.begin(), ok.end(), [](const Trial* a, const Trial* b) { return a->objective < b->objective; });
    if (ok.front()->objective == ok.back()->objective) return detail::uniform_draw(space, rng);

    const auto n_good = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.gamma * static_cast<double>(ok.size()))));
    const double cut = ok[n_good - 1]->objective;
    std::vector<const Trial*> good, bad;
    for (const auto* t : ok) (t->objective <= cut ? good : bad).push_back(t);

    // Candidates are drawn dimension by dimension from l, then scored by the
    // summed log density ratio.
    std::vector<Assignment> candidates(cfg.n_candidates, Assignment(space.params.size()));
    std::vector<double> score(cfg.n_candidates, 0.0);
    for (std::size_t d = 0; d < space.params.size(); ++d) {
        const auto& p = space.params[d];
        std::vector<double> gobs, bobs;
        if (p.kind == DomainKind::Categorical) {
            for (const auto* t : good) gobs.push_back(t->x[d]);
            for (const auto* t : bad) bobs.push_back(t->x[d]);
            const auto lw = detail::category_weights(gobs, p.choices.size(), cfg.categorical_pseudo_count);
            const auto gw = detail::category_weights(bobs, p.choices.size(), cfg.categorical_pseudo_count);
            for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
                double u = rng.uniform();
                std::size_t k = 0;
                while (k + 1 < lw.size() && u >= lw[k]) u -= lw[k++];
                candidates[c][d] = static_cast<double>(k);
                score[c] += std::log(lw[k]) - std::log(gw[k]);
            }
            continue;
        }
        for (const auto* t : good) gobs.push_back(detail::to_work(p, t->x[d]));
        for (const auto* t : bad) bobs.push_back(detail::to_work(p, t->x[d]));
        const double lo = detail::work_lo(p), hi = detail::work_hi(p);
        double m = 0.0, var = 0.0;
        for (double o : gobs) m += o;
        for (double o : bobs) m += o;
        m /= static_cast<double>(ok.size());
        for (double o : gobs) var += (o - m) * (o - m);
        for (double o : bobs) var += (o - m) * (o - m);
        const double sd = ok.size() >= 2 ? std::sqrt(var / static_cast<double>(ok.size() - 1)) : (hi - lo) / 10.0;
        const detail::TruncatedKde l(gobs, lo, hi, cfg.prior_weight, ok.size(), sd);
        const detail::TruncatedKde g(bobs, lo, hi, cfg.prior_weight, ok.size(), sd);
        for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
            const double w = l.sample(rng);
            const double v = detail::from_work(p, w);
            candidates[c][d] = v;
            const double wv = p.kind == DomainKind::Integer ? v : detail::to_work(p, v);
            score[c] += l.log_pdf(wv) - g.log_pdf(wv);
        }
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c)
        if (score[c] > score[best]) best = c;
    return candidates[best];
}

struct TuneResult {
    Trial best;
    std::vector<Trial> history;
};

using Objective = std::function<double(const Assignment&)>;

/// Sequential suggest/evaluate loop. An evaluation that throws or returns a
/// non-finite value is recorded as failed.
inline TuneResult tune(const Objective& objective, const SearchSpace& space, const TPEConfig& cfg, std::size_t budget) {
    if (budget < 1) throw Error(ErrorKind::Config, "tuning budget must be >= 1");
    TuneResult res;
    for (std::size_t i = 0; i < budget; ++i) {
        Trial t;
        t.index = i;
        t.x = suggest(res.history, space, cfg);
        try {
            t.objective = objective(t.x);
            t.ok = std::isfinite(t.objective);
            if (!t.ok) t.error = "non-finite objective";
        } catch (const std::exception& e) {
            t.ok = false;
            t.error = e.what();
        }
        res.history.push_back(std::move(t));
    }
    const Trial* best = nullptr;
    for (const auto& t : res.history)
        if (t.ok && (!best || t.objective < best->objective)) best = &t;
    if (!best) throw Error(ErrorKind::Optimization, "all " + std::to_string(budget) + " trials failed; first error: " +
                                                        res.history.front().error);
    res.best = *best;
    return res;
}

/// Uniform random search with the same trial bookkeeping, for comparison.
inline TuneResult random_search(const Objective& objective, const SearchSpace& space, std::uint64_t seed,
                                std::size_t budget) {
    TPEConfig cfg;
    cfg.seed = seed;
    cfg.n_startup = budget + 1;
    return tune(objective, space, cfg, budget);
}

// ---- GBDT search space -----------------------------------------------------

inline SearchSpace default_gbdt_space() {
    return {{
        ParamDomain::integer("n_trees", 50, 800),
        ParamDomain::continuous("learning_rate", 0.01, 0.3, true),
        ParamDomain::integer("max_leaves", 4, 64),
        ParamDomain::integer("min_samples_leaf", 5, 100),
        ParamDomain::continuous("feature_fraction", 0.5, 1.0),
        ParamDomain::continuous("row_subsample", 0.5, 1.0),
        ParamDomain::continuous("l2_leaf_reg", 0.0, 10.0),
    }};
}

/// Applies an assignment to GBDT parameters; names outside the GBDT fields
/// are rejected.
inline GBDTParams apply_assignment(const SearchSpace& space, const Assignment& x, GBDTParams p) {
    for (std::size_t i = 0; i < space.params.size(); ++i) {
        const auto& name = space.params[i].name;
        const double v = x[i];
        if (name == "n_trees") p.n_trees = static_cast<std::size_t>(v);
        else if (name == "learning_rate") p.learning_rate = v;
        else if (name == "max_leaves") p.max_leaves = static_cast<std::size_t>(v);
        else if (name == "min_samples_leaf") p.min_samples_leaf = static_cast<std::size_t>(v);
        else if (name == "feature_fraction") p.feature_fraction = v;
        else if (name == "row_subsample") p.row_subsample = v;
        else if (name == "l2_leaf_reg") p.l2_leaf_reg = v;
        else if (name == "n_bins") p.n_bins = static_cast<std::size_t>(v);
        else throw Error(ErrorKind::Config, "'" + name + "' is not a tunable GBDT parameter");
    }
    return p;
}

inline nlohmann::json space_to_json(const SearchSpace& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : s.params) {
        switch (p.kind) {
        case DomainKind::Continuous:
            arr.push_back({{"name", p.name}, {"type", "float"}, {"low", p.lo}, {"high", p.hi}, {"log", p.log}});
            break;
        case DomainKind::Integer:
            arr.push_back({{"name", p.name}, {"type", "int"}, {"low", p.lo}, {"high", p.hi}});
            break;
        case DomainKind::Categorical: arr.push_back({{"name", p.name}, {"type", "categorical"}, {"choices", p.choices}}); break;
        }
    }
    return {{"params", arr}};
}

/// {"params": [{"name", "type": float|int|categorical, "low", "high", "log", "choices"}]}
inline SearchSpace space_from_json(const nlohmann::json& j) {
    SearchSpace s;
    try {
        for (const auto& e : j.at("params")) {
            const auto name = e.at("name").get<std::string>();
            const auto type = e.at("type").get<std::string>();
            if (type == "float")
                s.params.push_back(ParamDomain::continuous(name, e.at("low").get<double>(), e.at("high").get<double>(),
                                                           e.value("log", false)));
            else if (type == "int")
                s.params.push_back(ParamDomain::integer(name, e.at("low").get<long>(), e.at("high").get<long>()));
            else if (type == "categorical")
                s.params.push_back(ParamDomain::categorical(name, e.at("choices").get<std::vector<std::string>>()));
            else throw Error(ErrorKind::Schema, "unknown domain type '" + type + "' for '" + name + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("search space: ") + e.what());
    }
    s.validate();
    return s;
}

inline std::string format_value(const ParamDomain& p, double v) {
    if (p.kind == DomainKind::Categorical) return p.choices[static_cast<std::size_t>(v)];
    return format_double(v);
}

inline nlohmann::json assignment_to_json(const SearchSpace& s, const Assignment& x) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < s.params.size(); ++i) {
        const auto& p = s.params[i];
        if (p.kind == DomainKind::Categorical) j[p.name] = p.choices[static_cast<std::size_t>(x[i])];
        else if (p.kind == DomainKind::Integer) j[p.name] = static_cast<long>(x[i]);
        else j[p.name] = x[i];
    }
    return j;
}

inline void write_trials_csv(std::ostream& out, const SearchSpace& s, const std::vector<Trial>& history) {
    out << "trial,status,objective";
    for (const auto& p : s.params) out << ',' << p.name;
    out << '\n';
    for (const auto& t : history) {
        out << t.index << ',' << (t.ok ? "ok" : "failed") << ',' << (t.ok ? format_double(t.objective) : std::string());
        for (std::size_t i = 0; i < s.params.size(); ++i) out << ',' << format_value(s.params[i], t.x[i]);
        out << '\n';
    }
}

} // namespace loadfc
