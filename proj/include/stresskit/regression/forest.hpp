#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stresskit/error.hpp"
#include "stresskit/regression/matrix.hpp"
#include "stresskit/regression/metrics.hpp"
#include "stresskit/regression/tree.hpp"
#include "stresskit/rng.hpp"

namespace stresskit {

struct ForestParams {
    std::size_t n_trees = 100;
    TreeParams tree{12, 2, 0};    // tree.max_features is ignored; see max_features
    std::size_t max_features = 0;  // per split; 0 means ceil(f/3)
    bool bootstrap = true;

    std::size_t features_per_split(std::size_t n_features) const {
        std::size_t m = max_features == 0 ? (n_features + 2) / 3 : max_features;
        return std::clamp<std::size_t>(m, 1, n_features);
    }

    bool operator==(const ForestParams&) const = default;
};

struct RandomForest {
    ForestParams params;
    std::size_t n_features = 0;
    std::size_t max_features = 0;
    std::vector<std::uint64_t> tree_seeds;
    std::vector<RegressionTree> trees;
    std::optional<double> oob_r2;

    std::vector<double> tree_predictions(std::span<const double> x) const {
        std::vector<double> out;
        out.reserve(trees.size());
        for (const auto& t : trees) out.push_back(t.predict(x));
        return out;
    }

    double predict(std::span<const double> x) const {
        if (x.size() != n_features)
            throw DimensionMismatch(fmt::format("forest expects {} features, got {}", n_features, x.size()));
        double sum = 0.0;
        for (const auto& t : trees) sum += t.predict(x);
        return sum / static_cast<double>(trees.size());
    }

    bool operator==(const RandomForest&) const = default;
};

inline double predict_forest(const RandomForest& f, std::span<const double> x) { return f.predict(x); }

/// Forest for a single output column. Per-tree seeds are all derived before any tree is grown.
inline RandomForest fit_forest_single(const Matrix& X, std::span<const double> y, const ForestParams& hp,
                                      std::uint64_t seed) {
    detail::check_training_data(X, y);
    if (X.rows() < 2) throw InvalidArgument("forest: need at least 2 samples");
    if (hp.n_trees < 1) throw InvalidArgument("forest: n_trees must be >= 1");

    const std::size_t n = X.rows();
    RandomForest forest;
    forest.params = hp;
    forest.n_features = X.cols();
    forest.max_features = hp.features_per_split(X.cols());
    for (std::size_t t = 0; t < hp.n_trees; ++t) forest.tree_seeds.push_back(derive_seed(seed, t));

    TreeParams tp = hp.tree;
    tp.max_features = forest.max_features;

    std::vector<double> oob_sum(n, 0.0);
    std::vector<std::size_t> oob_count(n, 0);
    for (std::size_t t = 0; t < hp.n_trees; ++t) {
        Rng rng(forest.tree_seeds[t]);
        std::vector<std::size_t> rows(n);
        std::vector<bool> in_bag(n, !hp.bootstrap);
        if (hp.bootstrap) {
            std::uniform_int_distribution<std::size_t> draw(0, n - 1);
            for (auto& r : rows) {
                r = draw(rng);
                in_bag[r] = true;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) rows[i] = i;
        }
        Matrix Xb = X.select_rows(rows);
        std::vector<double> yb(n);
        for (std::size_t i = 0; i < n; ++i) yb[i] = y[rows[i]];
        forest.trees.push_back(fit_tree(Xb, yb, tp, rng()));
        for (std::size_t i = 0; i < n; ++i) {
            if (in_bag[i]) continue;
            oob_sum[i] += forest.trees.back().predict(X.row(i));
            ++oob_count[i];
        }
    }

    std::vector<double> truth, pred;
    for (std::size_t i = 0; i < n; ++i) {
        if (oob_count[i] == 0) continue;
        truth.push_back(y[i]);
        pred.push_back(oob_sum[i] / static_cast<double>(oob_count[i]));
    }
    forest.oob_r2 = try_r_squared(truth, pred);
    return forest;
}

/// One independent forest per column of Y.
inline std::vector<RandomForest> fit_forest(const Matrix& X, const Matrix& Y, const ForestParams& hp,
                                            std::uint64_t seed) {
    if (X.rows() == 0 || Y.rows() == 0) throw InvalidArgument("forest: empty training data");
    if (Y.rows() != X.rows()) throw DimensionMismatch(fmt::format("forest: {} target rows for {} rows", Y.rows(), X.rows()));
    std::vector<RandomForest> out;
    for (std::size_t c = 0; c < Y.cols(); ++c) {
        auto y = Y.col(c);
        out.push_back(fit_forest_single(X, y, hp, derive_seed(seed, c)));
    }
    return out;
}

inline nlohmann::json forest_to_json(const RandomForest& f) {
    nlohmann::json j;
    j["n_trees"] = f.params.n_trees;
    j["tree_params"] = tree_params_to_json(f.params.tree);
    j["max_features"] = f.max_features;
    j["max_features_setting"] = f.params.max_features;
    j["bootstrap"] = f.params.bootstrap;
    j["n_features"] = f.n_features;
    j["tree_seeds"] = f.tree_seeds;
    j["oob_r2"] = f.oob_r2 ? nlohmann::json(*f.oob_r2) : nlohmann::json(nullptr);
    j["trees"] = nlohmann::json::array();
    for (const auto& t : f.trees) j["trees"].push_back(tree_to_json(t));
    return j;
}

inline RandomForest forest_from_json(const nlohmann::json& j) {
    RandomForest f;
    f.params.n_trees = j.at("n_trees").get<std::size_t>();
    f.params.tree = tree_params_from_json(j.at("tree_params"));
    f.params.max_features = j.at("max_features_setting").get<std::size_t>();
    f.params.bootstrap = j.at("bootstrap").get<bool>();
    f.max_features = j.at("max_features").get<std::size_t>();
    f.n_features = j.at("n_features").get<std::size_t>();
    f.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
    if (!j.at("oob_r2").is_null()) f.oob_r2 = j.at("oob_r2").get<double>();
    for (const auto& tj : j.at("trees")) {
        f.trees.push_back(tree_from_json(tj));
        if (f.trees.back().n_features != f.n_features) throw DataError("forest: tree feature count mismatch");
    }
    if (f.trees.empty() || f.trees.size() != f.params.n_trees) throw DataError("forest: tree count mismatch");
    return f;
}

}  // namespace stresskit
