#pragma once

#include "loadfc/ensemble.hpp"
#include "loadfc/error.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>

namespace loadfc {

inline constexpr int kModelSchemaVersion = 1;

inline nlohmann::json params_to_json(const GBDTParams& p) {
    return {{"n_trees", p.n_trees},           {"learning_rate", p.learning_rate},
            {"max_leaves", p.max_leaves},     {"min_samples_leaf", p.min_samples_leaf},
            {"feature_fraction", p.feature_fraction}, {"row_subsample", p.row_subsample},
            {"l2_leaf_reg", p.l2_leaf_reg},   {"n_bins", p.n_bins},
            {"seed", p.seed}};
}

/// Missing keys keep their defaults so partial parameter files are accepted.
inline GBDTParams params_from_json(const nlohmann::json& j, GBDTParams p = {}) {
    if (!j.is_object()) throw Error(ErrorKind::Schema, "params must be a JSON object");
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    try {
        get("n_trees", p.n_trees);
        get("learning_rate", p.learning_rate);
        get("max_leaves", p.max_leaves);
        get("min_samples_leaf", p.min_samples_leaf);
        get("feature_fraction", p.feature_fraction);
        get("row_subsample", p.row_subsample);
        get("l2_leaf_reg", p.l2_leaf_reg);
        get("n_bins", p.n_bins);
        get("seed", p.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("bad params: ") + e.what());
    }
    return p;
}

inline nlohmann::json model_to_json(const TreeEnsembleModel& m) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : m.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            if (n.is_leaf()) {
                nodes.push_back({{"leaf", n.value}});
            } else if (n.categorical) {
                nlohmann::json cats = nlohmann::json::array();
                for (unsigned c = 0; c < 64; ++c)
                    if ((n.category_mask >> c) & 1ULL) cats.push_back(c);
                nodes.push_back({{"feature", n.feature}, {"categories", cats}, {"left", n.left}, {"right", n.right}});
            } else {
                nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
            }
        }
        trees.push_back({{"nodes", nodes}});
    }
    return {{"version", kModelSchemaVersion},
            {"mode", std::string(to_string(m.mode))},
            {"params", params_to_json(m.params)},
            {"base_score", m.base_score},
            {"features", m.features},
            {"categories", m.categories},
            {"training_loss", m.training_loss},
            {"trees", trees}};
}

inline std::string serialize_model(const TreeEnsembleModel& m) { return model_to_json(m).dump(); }

inline TreeEnsembleModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("version")) throw Error(ErrorKind::Schema, "model document lacks a version");
    const int version = j.at("version").is_number_integer() ? j.at("version").get<int>() : -1;
    if (version != kModelSchemaVersion)
        throw Error(ErrorKind::Version, "model schema version " + j.at("version").dump() + " is not supported (reader " +
                                            std::to_string(kModelSchemaVersion) + ")");
    TreeEnsembleModel m;
    try {
        const auto mode = j.at("mode").get<std::string>();
        if (mode == "boosted") m.mode = EnsembleMode::Boosted;
        else if (mode == "bagged") m.mode = EnsembleMode::Bagged;
        else throw Error(ErrorKind::Schema, "unknown mode '" + mode + "'");
        m.params = params_from_json(j.at("params"));
        m.base_score = j.at("base_score").get<double>();
        m.features = j.at("features").get<std::vector<std::string>>();
        m.categories = j.value("categories", std::vector<int>(m.features.size(), 0));
        m.training_loss = j.value("training_loss", std::vector<double>{});
        const int p = static_cast<int>(m.features.size());
        for (const auto& jt : j.at("trees")) {
            RegressionTree t;
            const auto& jn = jt.at("nodes");
            const int count = static_cast<int>(jn.size());
            for (const auto& node : jn) {
                TreeNode n;
                if (node.contains("leaf")) {
                    n.value = node.at("leaf").get<double>();
                    if (!std::isfinite(n.value)) throw Error(ErrorKind::Schema, "non-finite leaf value");
                } else {
                    n.feature = node.at("feature").get<int>();
                    if (n.feature < 0 || n.feature >= p)
                        throw Error(ErrorKind::Schema, "split references unknown feature " + std::to_string(n.feature));
                    n.left = node.at("left").get<int>();
                    n.right = node.at("right").get<int>();
                    if (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count)
                        throw Error(ErrorKind::Schema, "split has out-of-range children");
                    if (node.contains("categories")) {
                        n.categorical = true;
                        for (const auto& c : node.at("categories")) {
                            const auto code = c.get<unsigned>();
                            if (code >= 64) throw Error(ErrorKind::Schema, "category code out of range");
                            n.category_mask |= 1ULL << code;
                        }
                    } else {
                        n.threshold = node.at("threshold").get<double>();
                    }
                }
                t.nodes.push_back(n);
            }
            if (t.nodes.empty()) throw Error(ErrorKind::Schema, "tree without nodes");
            m.trees.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("malformed model document: ") + e.what());
    }
    if (m.trees.empty()) throw Error(ErrorKind::Schema, "model has no trees");
    m.fitted = true;
    return m;
}

inline TreeEnsembleModel deserialize_model(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Parse, std::string("model document: ") + e.what());
    }
    return model_from_json(j);
}

/// FNV-1a 64 of the serialized model, as 16 hex digits.
inline std::string model_fingerprint(const std::string& serialized) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialized) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace loadfc
